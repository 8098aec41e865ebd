"""Core value types: terms, ids, statements and the partition hash.

A term is the parser's canonical token as ``bytes``: IRIs without their angle
brackets, literals verbatim with quotes/language tag/datatype, blank nodes as
``_:label``. Statements are plain tuples of 3 or 4 terms; encoded statements
are tuples of unsigned 64-bit ints. Blank-node labels are global, so ``_:b1``
in two files is the same term.
"""
from typing import Tuple

from . import kernels
from .errors import ConfigError

Term = bytes
TermId = int
Statement = Tuple[bytes, ...]
EncodedStatement = Tuple[int, ...]

NIL_ID = 0
MAX_ID = 2**64 - 1


def partition_hash(term: Term) -> int:
    """64-bit FNV-1a digest of the term bytes."""
    return kernels.fnv1a64(term)


def destination(term: Term, place_count: int) -> int:
    """Index of the place whose dictionary owns ``term``."""
    if place_count < 1:
        raise ConfigError(f"place count must be >= 1, got {place_count}")
    return kernels.fnv1a64(term) % place_count


def owner_of(term_id: TermId, place_count: int) -> int:
    return term_id % place_count


def is_iri(term: Term) -> bool:
    return not (term.startswith(b'"') or term.startswith(b"_:"))


def serialize_term(term: Term) -> bytes:
    if is_iri(term):
        return b"<" + term + b">"
    return term


def serialize_statement(statement: Statement) -> bytes:
    """N-Triples/N-Quads line for ``statement``, LF-terminated."""
    return b" ".join([serialize_term(t) for t in statement]) + b" .\n"
