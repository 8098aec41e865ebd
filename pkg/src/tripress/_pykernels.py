"""Pure-Python kernels. Used when the compiled extension is unavailable.

Every function here has a twin in ``_kernels.pyx`` with identical results.
"""
import re

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF

IMPLEMENTATION = "python"


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK
    return h


def route_terms(terms, place_count, seen, groups):
    """Append every term not yet in ``seen`` to ``groups[fnv1a64(t) % P]``.

    Returns the number of newly routed terms.
    """
    added = 0
    for t in terms:
        if t not in seen:
            seen.add(t)
            groups[fnv1a64(t) % place_count].append(t)
            added += 1
    return added


def destinations(terms, place_count):
    return [fnv1a64(t) % place_count for t in terms]


_IRI = rb'<([^\x00-\x20<>"{}|^`]+)>'
_BNODE = rb"(_:[A-Za-z0-9_\x80-\xff](?:[A-Za-z0-9_\-.\x80-\xff]*[A-Za-z0-9_\-\x80-\xff])?)(?![A-Za-z0-9_\-\x80-\xff])"
_LITERAL = (
    rb'("(?:[^"\\\n\r\t]|\\[^\n\r\t])*"'
    rb'(?:@[A-Za-z]+(?:-[A-Za-z0-9]+)*|\^\^<[^\x00-\x20<>"{}|^`]+>)?)'
)
_WS = rb"[ \t]*"
_STATEMENT = re.compile(
    _WS
    + rb"(?:" + _IRI + rb"|" + _BNODE + rb")"
    + _WS + _IRI
    + _WS + rb"(?:" + _IRI + rb"|" + _BNODE + rb"|" + _LITERAL + rb")"
    + rb"(?:" + _WS + rb"(?:" + _IRI + rb"|" + _BNODE + rb"))?"
    + _WS + rb"\." + _WS + rb"(?:#.*)?\Z",
    re.DOTALL,
)
_BLANK = re.compile(rb"[ \t]*(?:#.*)?\Z", re.DOTALL)


def split_statement(line: bytes):
    """Tokenize one N-Triples/N-Quads line.

    Returns a tuple of 3 or 4 terms, or None for blank and comment lines.
    Raises ValueError on malformed input.
    """
    if line.endswith(b"\n"):
        line = line[:-1]
        if line.endswith(b"\r"):
            line = line[:-1]
    m = _STATEMENT.match(line)
    if m is None:
        if _BLANK.match(line):
            return None
        raise ValueError("malformed statement")
    g = m.groups()
    s = g[0] if g[0] is not None else g[1]
    o = g[3] if g[3] is not None else (g[4] if g[4] is not None else g[5])
    c = g[6] if g[6] is not None else g[7]
    if c is None:
        return (s, g[2], o)
    return (s, g[2], o, c)


def encode_terms(terms, dictionary, next_ordinal, place_count, place_index, journal):
    """Look up or assign an id for each term.

    New ids are ``(ordinal + 1) * P + place``; new ``(id, term)`` pairs are
    appended to ``journal``. Returns ``(ids, next_ordinal, misses)``.
    """
    ids = []
    misses = 0
    get = dictionary.get
    for t in terms:
        i = get(t)
        if i is None:
            next_ordinal += 1
            i = next_ordinal * place_count + place_index
            if i > 0xFFFFFFFFFFFFFFFF:
                raise OverflowError("64-bit id space exhausted")
            dictionary[t] = i
            journal.append((i, t))
            misses += 1
        ids.append(i)
    return ids, next_ordinal, misses
