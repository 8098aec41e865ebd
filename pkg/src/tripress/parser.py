"""Streaming line-oriented N-Triples / N-Quads reader.

``.gz`` inputs are decompressed on the fly. Chunks are counted in
statements and never split one.
"""
import gzip
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, List, Optional

from . import kernels
from .errors import ParseError, TripressError
from .terms import Statement

log = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 100_000


@dataclass
class Chunk:
    statements: List[Statement]
    source_label: str = ""
    ordinal: int = 0

    def __len__(self):
        return len(self.statements)


@dataclass
class ParseStats:
    statements: int = 0
    skipped_bad: int = 0
    plain_bytes: int = 0
    files: List[str] = field(default_factory=list)


def parse_statement(line: bytes, source: str = "<input>", line_no: int = 0) -> Optional[Statement]:
    """Split one line into its terms; None for blank and comment lines."""
    try:
        return kernels.split_statement(line)
    except ValueError as exc:
        raise ParseError(str(exc), source, line_no) from None


def open_input(path):
    path = Path(path)
    try:
        if path.suffix == ".gz":
            return gzip.open(path, "rb")
        return open(path, "rb")
    except OSError as exc:
        raise TripressError(f"cannot read {path}: {exc.strerror or exc}") from exc


def iter_statements(path, skip_bad=False, stats: Optional[ParseStats] = None) -> Iterator[Statement]:
    split = kernels.split_statement
    label = str(path)
    if stats is not None:
        stats.files.append(label)
    with open_input(path) as fh:
        try:
            for line_no, line in enumerate(fh, 1):
                if stats is not None:
                    stats.plain_bytes += len(line)
                try:
                    st = split(line)
                except ValueError as exc:
                    if not skip_bad:
                        raise ParseError(str(exc), label, line_no) from None
                    if stats is not None:
                        stats.skipped_bad += 1
                    log.warning("skipping malformed statement at %s:%d", label, line_no)
                    continue
                if st is not None:
                    if stats is not None:
                        stats.statements += 1
                    yield st
        except (OSError, EOFError) as exc:
            raise TripressError(f"cannot read {label}: {exc}") from exc


def stream_chunks(paths: Iterable, chunk_size: int = DEFAULT_CHUNK_SIZE, skip_bad=False,
                  stats: Optional[ParseStats] = None) -> Iterator[Chunk]:
    """Yield chunks of ``chunk_size`` statements; the last chunk of each file may be short."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    ordinal = 0
    for path in paths:
        buf: List[Statement] = []
        first_line = 1
        count = 0
        for st in iter_statements(path, skip_bad, stats):
            buf.append(st)
            count += 1
            if len(buf) == chunk_size:
                yield Chunk(buf, f"{path}[{first_line}-{count}]", ordinal)
                ordinal += 1
                buf = []
                first_line = count + 1
        if buf:
            yield Chunk(buf, f"{path}[{first_line}-{count}]", ordinal)
            ordinal += 1


def chunk_statements(statements: Iterable[Statement], chunk_size: int, label="<memory>", start=0) -> Iterator[Chunk]:
    """Chunk an in-memory statement sequence the same way files are chunked."""
    buf: List[Statement] = []
    ordinal = start
    for st in statements:
        buf.append(st)
        if len(buf) == chunk_size:
            yield Chunk(buf, label, ordinal)
            ordinal += 1
            buf = []
    if buf:
        yield Chunk(buf, label, ordinal)
