"""Independent checks: sequential single-dictionary encoder, decoder and
post-run consistency checker."""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .errors import CorruptDataError, TripressError
from .storage import (REPORT, arity_name, check_manifest, data_name, dictionary_paths, find_file,
                      iter_dictionary, read_encoded)
from .terms import Statement, destination, serialize_statement


def sequential_encode(statements: Iterable[Statement]):
    """Encode with one dictionary, ids 1, 2, 3, ... in first-occurrence order.

    Returns ``(dictionary, encoded statements)``.
    """
    dictionary: Dict[bytes, int] = {}
    encoded = []
    for st in statements:
        row = []
        for t in st:
            i = dictionary.get(t)
            if i is None:
                i = len(dictionary) + 1
                dictionary[t] = i
            row.append(i)
        encoded.append(tuple(row))
    return dictionary, encoded


def equality_classes(ids: Iterable[int]) -> List[int]:
    """Relabel a sequence so that equal values map to their first-occurrence index."""
    first: Dict[int, int] = {}
    return [first.setdefault(i, len(first)) for i in ids]


@dataclass
class Violation:
    kind: str  # "functionality" | "injectivity" | "residue"
    detail: str


@dataclass
class ConsistencyReport:
    places: int
    entries: int = 0
    terms: int = 0
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def count(self, kind):
        return sum(1 for v in self.violations if v.kind == kind)

    def to_dict(self):
        return {"places": self.places, "entries": self.entries, "terms": self.terms, "ok": self.ok,
                "violations": [{"kind": v.kind, "detail": v.detail} for v in self.violations]}


def check_consistency(dict_files: Sequence, places: Optional[int] = None) -> ConsistencyReport:
    """Pool every dictionary and check term->id functionality, id->term
    injectivity and the residue law ``id % P == owner == fnv(term) % P``.

    ``dict_files[p]`` must be place ``p``'s dictionary.
    """
    P = places if places is not None else len(dict_files)
    report = ConsistencyReport(P)
    term_to_id: Dict[bytes, Tuple[int, str]] = {}
    id_to_term: Dict[int, Tuple[bytes, str]] = {}
    for place, path in enumerate(dict_files):
        for line_no, term_id, term in iter_dictionary(path):
            where = f"{Path(path).name}:{line_no}"
            report.entries += 1
            prev = term_to_id.get(term)
            if prev is None:
                term_to_id[term] = (term_id, where)
            elif prev[0] != term_id:
                report.violations.append(Violation(
                    "functionality", f"{term!r} has id {prev[0]} at {prev[1]} and {term_id} at {where}"))
            other = id_to_term.get(term_id)
            if other is None:
                id_to_term[term_id] = (term, where)
            elif other[0] != term:
                report.violations.append(Violation(
                    "injectivity", f"id {term_id} names {other[0]!r} at {other[1]} and {term!r} at {where}"))
            owner = destination(term, P)
            if term_id < P or term_id % P != place or owner != place:
                report.violations.append(Violation(
                    "residue", f"{where}: id {term_id} (mod {P} = {term_id % P}) in place {place}, "
                               f"term owned by place {owner}"))
    report.terms = len(term_to_id)
    return report


def load_id_table(dict_files) -> Dict[int, bytes]:
    table: Dict[int, bytes] = {}
    for path in dict_files:
        for _, term_id, term in iter_dictionary(path):
            table[term_id] = term
    return table


def _read_layout(out_dir) -> Optional[List[list]]:
    path = Path(out_dir) / REPORT
    if not path.exists():
        return None
    return json.loads(path.read_text()).get("chunk_layout")


def decode_places(out_dir) -> Iterator[Tuple[int, List[Statement]]]:
    """Yield ``(place, statements)`` for every place in place order."""
    places, _ = check_manifest(out_dir)
    dict_files = dictionary_paths(out_dir, places)
    table = load_id_table(dict_files)
    for p in range(places):
        data = find_file(out_dir, data_name(p))
        if data is None:
            raise TripressError(f"{out_dir}: missing {data_name(p)}")
        header, flat, arities = read_encoded(data, find_file(out_dir, arity_name(p)))
        try:
            terms = [table[i] for i in flat]
        except KeyError:
            for k, i in enumerate(flat):
                if i not in table:
                    raise CorruptDataError(f"{data.name}: unknown id {i} at byte offset {24 + 8 * k}") from None
            raise
        out = []
        pos = 0
        for a in arities:
            out.append(tuple(terms[pos:pos + a]))
            pos += a
        yield p, out


def decode(out_dir, input_order: bool = False) -> Iterator[Statement]:
    """Statements of a finished run: place by place, or in input order when
    the run report's chunk layout is available and ``input_order`` is set."""
    if not input_order:
        for _, stmts in decode_places(out_dir):
            yield from stmts
        return
    layout = _read_layout(out_dir)
    if layout is None:
        raise TripressError(f"{out_dir}: no chunk layout in {REPORT}, cannot restore input order")
    per_place = dict(decode_places(out_dir))
    cursors = {p: 0 for p in per_place}
    chunks = []
    for ordinal, place, n in layout:
        start = cursors[place]
        chunks.append((ordinal, per_place[place][start:start + n]))
        cursors[place] = start + n
    for _, stmts in sorted(chunks, key=lambda c: c[0]):
        yield from stmts


def decode_to_file(out_dir, path, input_order=False) -> int:
    n = 0
    with open(path, "wb") as fh:
        buf = []
        for st in decode(out_dir, input_order):
            buf.append(serialize_statement(st))
            n += 1
            if len(buf) >= 65536:
                fh.write(b"".join(buf))
                buf.clear()
        fh.write(b"".join(buf))
    return n


def encoded_in_input_order(out_dir) -> List[int]:
    """Flat id sequence of a run rearranged into input statement order."""
    places, _ = check_manifest(out_dir)
    layout = _read_layout(out_dir)
    if layout is None:
        raise TripressError(f"{out_dir}: no chunk layout in {REPORT}")
    streams = {}
    for p in range(places):
        _, flat, arities = read_encoded(find_file(out_dir, data_name(p)), find_file(out_dir, arity_name(p)))
        rows, pos = [], 0
        for a in arities:
            rows.append(flat[pos:pos + a])
            pos += a
        streams[p] = rows
    cursors = {p: 0 for p in streams}
    chunks = []
    for ordinal, place, n in layout:
        start = cursors[place]
        chunks.append((ordinal, streams[place][start:start + n]))
        cursors[place] = start + n
    out: List[int] = []
    for _, rows in sorted(chunks, key=lambda c: c[0]):
        for r in rows:
            out.extend(r)
    return out


def verify_run(out_dir) -> ConsistencyReport:
    """Manifest, dictionary consistency and data-file id coverage for one output directory."""
    places, _ = check_manifest(out_dir)
    dict_files = dictionary_paths(out_dir, places)
    report = check_consistency(dict_files, places)
    ids = set(load_id_table(dict_files))
    for p in range(places):
        data = find_file(out_dir, data_name(p))
        if data is None:
            raise TripressError(f"{out_dir}: missing {data_name(p)}")
        _, flat, _ = read_encoded(data, find_file(out_dir, arity_name(p)))
        missing = set(flat) - ids
        for i in sorted(missing)[:10]:
            report.violations.append(Violation("unknown-id", f"{data.name}: id {i} not in any dictionary"))
    return report
