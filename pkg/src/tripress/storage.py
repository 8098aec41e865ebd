"""On-disk formats.

* ``dict-<p>.tsv``: one ``<decimal id>\\t<term bytes>\\n`` record per mapping,
  in assignment order.
* ``data-<p>.bin``: 24-byte header then little-endian u64 ids, statement
  after statement. Mixed triple/quad places add ``data-<p>.arity`` with one
  arity byte per statement.
* ``report.json`` and ``MANIFEST``; the manifest is written last and marks
  the output directory complete.

With gzip output every file except report.json and MANIFEST gets ``.gz``.
"""
import gzip
import io
import os
import shutil
import struct
import sys
from array import array
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from .errors import CorruptDataError, CorruptDictionaryError, TripressError

MAGIC = b"RDE1"
VERSION = 1
HEADER = struct.Struct("<4sHBBIIQ")
ARITY_MIXED = 0
MANIFEST = "MANIFEST"
REPORT = "report.json"
_BIG_ENDIAN = sys.byteorder == "big"


def dict_name(place, gz=False):
    return f"dict-{place}.tsv" + (".gz" if gz else "")


def data_name(place, gz=False):
    return f"data-{place}.bin" + (".gz" if gz else "")


def arity_name(place, gz=False):
    return f"data-{place}.arity" + (".gz" if gz else "")


def find_file(directory, name) -> Optional[Path]:
    """``name`` or its ``.gz`` variant inside ``directory``."""
    for candidate in (Path(directory) / name, Path(directory) / (name + ".gz")):
        if candidate.exists():
            return candidate
    return None


def _open_read(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def format_mapping(term_id: int, term: bytes) -> bytes:
    return b"%d\t%s\n" % (term_id, term)


@dataclass
class EncodedHeader:
    places: int
    place: int
    arity_mode: int
    statements: int
    version: int = VERSION

    def pack(self):
        return HEADER.pack(MAGIC, self.version, self.arity_mode, 0, self.places, self.place, self.statements)

    @classmethod
    def unpack(cls, raw, name="<data>"):
        if len(raw) < HEADER.size:
            raise CorruptDataError(f"{name}: truncated header")
        magic, version, arity_mode, _, places, place, statements = HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise CorruptDataError(f"{name}: bad magic {magic!r}")
        if version != VERSION:
            raise CorruptDataError(f"{name}: unsupported version {version}")
        return cls(places, place, arity_mode, statements, version)


class _Sink:
    """Append-only byte sink: a plain file, a gzip file or memory."""

    def __init__(self, path: Path, gz: bool, in_memory: bool):
        self.path = path
        self.gz = gz
        self.in_memory = in_memory
        self.size = 0
        if in_memory:
            self._fh = io.BytesIO()
        elif gz:
            self._fh = gzip.open(path, "wb", compresslevel=6)
        else:
            self._fh = open(path, "wb")

    def write(self, data):
        self._fh.write(data)
        self.size += len(data)

    def close(self):
        if self.in_memory:
            data = self._fh.getvalue()
            if self.gz:
                with gzip.open(self.path, "wb", compresslevel=6) as fh:
                    fh.write(data)
            else:
                with open(self.path, "wb") as fh:
                    fh.write(data)
            self._fh = None
        else:
            self._fh.close()


class DictionaryWriter:
    """Journal of new mappings for one place."""

    def __init__(self, path, gz=False, in_memory=False, seed: Optional[Path] = None):
        self._sink = _Sink(Path(path), gz, in_memory)
        self.entries = 0
        if seed is not None:
            with _open_read(seed) as fh:
                while True:
                    block = fh.read(1 << 20)
                    if not block:
                        break
                    self._sink.write(block)

    def append_mapping(self, term_id: int, term: bytes):
        self._sink.write(format_mapping(term_id, term))
        self.entries += 1

    def append_many(self, mappings):
        if mappings:
            self._sink.write(b"".join([b"%d\t%s\n" % m for m in mappings]))
            self.entries += len(mappings)

    def close(self):
        self._sink.close()


class EncodedWriter:
    """Writes one place's encoded statement stream."""

    def __init__(self, directory, place, places, gz=False, in_memory=False):
        self.directory = Path(directory)
        self.place = place
        self.places = places
        self.gz = gz
        self.in_memory = in_memory
        self.statements = 0
        self.body_bytes = 0
        self._arity_seen = set()
        self._arities = bytearray() if in_memory else None
        self.path = self.directory / data_name(place, gz)
        self._arity_path = self.directory / arity_name(place, gz)
        # plain files get their header patched in place; gzip and memory go through a staging buffer
        self._direct = not gz and not in_memory
        if self._direct:
            self._fh = open(self.path, "wb")
            self._fh.write(EncodedHeader(places, place, 3, 0).pack())
            self._arity_fh = open(self.directory / (arity_name(place) + ".part"), "wb")
        elif in_memory:
            self._fh = io.BytesIO()
            self._arity_fh = None
        else:
            self._part = self.directory / (data_name(place) + ".part")
            self._fh = open(self._part, "wb")
            self._arity_fh = open(self.directory / (arity_name(place) + ".part"), "wb")

    def write_encoded(self, statement):
        self.write_flat(array("Q", statement), [len(statement)])

    def write_flat(self, flat: array, arities):
        if _BIG_ENDIAN:
            flat = array("Q", flat)
            flat.byteswap()
        data = flat.tobytes()
        self._fh.write(data)
        self.body_bytes += len(data)
        self.statements += len(arities)
        raw = bytes(arities)
        if len(self._arity_seen) < 2:
            self._arity_seen.update(set(raw))
        if self._arities is not None:
            self._arities += raw
        else:
            self._arity_fh.write(raw)

    @property
    def arity_mode(self):
        if len(self._arity_seen) > 1:
            return ARITY_MIXED
        if self._arity_seen:
            return next(iter(self._arity_seen))
        return 3

    def close(self) -> List[Path]:
        """Finalize the files and return the paths written."""
        header = EncodedHeader(self.places, self.place, self.arity_mode, self.statements).pack()
        mixed = self.arity_mode == ARITY_MIXED
        written = [self.path]
        arity_part = self.directory / (arity_name(self.place) + ".part")
        if self._direct:
            self._fh.seek(0)
            self._fh.write(header)
            self._fh.close()
        elif self.in_memory:
            body = self._fh.getvalue()
            opener = gzip.open if self.gz else open
            with opener(self.path, "wb") as fh:
                fh.write(header)
                fh.write(body)
        else:
            self._fh.close()
            with gzip.open(self.path, "wb", compresslevel=6) as out, open(self._part, "rb") as src:
                out.write(header)
                shutil.copyfileobj(src, out, 1 << 20)
            os.unlink(self._part)
        if self._arity_fh is not None:
            self._arity_fh.close()
        if mixed:
            if self._arities is not None:
                opener = gzip.open if self.gz else open
                with opener(self._arity_path, "wb") as fh:
                    fh.write(self._arities)
            elif self.gz:
                with gzip.open(self._arity_path, "wb") as out, open(arity_part, "rb") as src:
                    shutil.copyfileobj(src, out, 1 << 20)
                os.unlink(arity_part)
            else:
                os.replace(arity_part, self._arity_path)
            written.append(self._arity_path)
        elif arity_part.exists():
            os.unlink(arity_part)
        return written


def load_dictionary(path, expected_place: int, places: int) -> Tuple[Dict[bytes, int], Optional[int]]:
    """Read one place's dictionary; returns ``(term -> id, max id or None)``."""
    mapping: Dict[bytes, int] = {}
    ids = set()
    max_id = None
    last = -1
    with _open_read(path) as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.endswith(b"\n"):
                raise CorruptDictionaryError(f"{path}:{line_no}: unterminated record")
            id_text, sep, term = line[:-1].partition(b"\t")
            if not sep or not term:
                raise CorruptDictionaryError(f"{path}:{line_no}: malformed record")
            try:
                term_id = int(id_text)
            except ValueError:
                raise CorruptDictionaryError(f"{path}:{line_no}: bad id {id_text!r}") from None
            if term_id < places or term_id % places != expected_place:
                raise CorruptDictionaryError(
                    f"{path}:{line_no}: id {term_id} does not belong to place {expected_place} of {places}")
            if term_id in ids:
                raise CorruptDictionaryError(f"{path}:{line_no}: duplicate id {term_id}")
            if term in mapping:
                raise CorruptDictionaryError(f"{path}:{line_no}: duplicate term {term!r}")
            if term_id <= last:
                raise CorruptDictionaryError(f"{path}:{line_no}: ids not increasing")
            last = term_id
            ids.add(term_id)
            mapping[term] = term_id
            max_id = term_id
    return mapping, max_id


def iter_dictionary(path) -> Iterator[Tuple[int, int, bytes]]:
    """Yield ``(line_no, id, term)`` without validation beyond the record shape."""
    with _open_read(path) as fh:
        for line_no, line in enumerate(fh, 1):
            id_text, sep, term = line.rstrip(b"\n").partition(b"\t")
            try:
                yield line_no, int(id_text), term
            except ValueError:
                raise CorruptDictionaryError(f"{path}:{line_no}: bad id {id_text!r}") from None


def read_encoded(path, arity_path=None):
    """Return ``(header, flat ids, arities)`` for one data file."""
    with _open_read(path) as fh:
        raw = fh.read()
    header = EncodedHeader.unpack(raw, str(path))
    body = memoryview(raw)[HEADER.size:]
    if len(body) % 8:
        raise CorruptDataError(f"{path}: body length {len(body)} is not a multiple of 8")
    flat = array("Q")
    flat.frombytes(body)
    if _BIG_ENDIAN:
        flat.byteswap()
    if header.arity_mode == ARITY_MIXED:
        if arity_path is None:
            raise CorruptDataError(f"{path}: mixed arity but no .arity sidecar")
        with _open_read(arity_path) as fh:
            arities = fh.read()
        if len(arities) != header.statements or sum(arities) != len(flat):
            raise CorruptDataError(f"{path}: arity sidecar does not match body")
    else:
        if header.arity_mode not in (3, 4):
            raise CorruptDataError(f"{path}: bad arity mode {header.arity_mode}")
        if header.statements * header.arity_mode != len(flat):
            raise CorruptDataError(f"{path}: body holds {len(flat)} ids, expected "
                                   f"{header.statements} x {header.arity_mode}")
        arities = bytes([header.arity_mode]) * header.statements
    return header, flat, arities


def compute_compression_ratio(input_bytes_plain: int, encoded_bytes: int, dict_bytes: int) -> float:
    total = encoded_bytes + dict_bytes
    if total <= 0:
        raise ValueError("output size must be positive")
    return input_bytes_plain / total


def write_manifest(directory, places: int, files):
    """Write MANIFEST listing ``files`` (names relative to directory) with sizes."""
    directory = Path(directory)
    lines = ["# tripress manifest v1", f"places\t{places}"]
    for name in sorted(files):
        lines.append(f"file\t{name}\t{(directory / name).stat().st_size}")
    tmp = directory / (MANIFEST + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, directory / MANIFEST)


def read_manifest(directory):
    """Return ``(places, {name: size})``; raises if the run never committed."""
    path = Path(directory) / MANIFEST
    if not path.exists():
        raise TripressError(f"{directory}: no MANIFEST, the run is incomplete or invalid")
    places = None
    files = {}
    for line in path.read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if parts[0] == "places":
            places = int(parts[1])
        elif parts[0] == "file":
            files[parts[1]] = int(parts[2])
    if places is None:
        raise CorruptDataError(f"{path}: missing places line")
    return places, files


def check_manifest(directory):
    places, files = read_manifest(directory)
    for name, size in files.items():
        p = Path(directory) / name
        if not p.exists():
            raise CorruptDataError(f"{directory}: {name} listed in MANIFEST is missing")
        if p.stat().st_size != size:
            raise CorruptDataError(f"{directory}: {name} is {p.stat().st_size} bytes, MANIFEST says {size}")
    return places, files


def dictionary_paths(directory, places) -> List[Path]:
    out = []
    for p in range(places):
        path = find_file(directory, dict_name(p))
        if path is None:
            raise TripressError(f"{directory}: missing {dict_name(p)}")
        out.append(path)
    return out


def detect_places(directory) -> int:
    """Place count of an output directory, from MANIFEST or the dict files present."""
    try:
        return read_manifest(directory)[0]
    except TripressError:
        pass
    n = 0
    while find_file(directory, dict_name(n)) is not None:
        n += 1
    if n == 0:
        raise TripressError(f"{directory}: no dictionary files")
    return n
