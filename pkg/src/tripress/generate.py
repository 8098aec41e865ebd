"""Synthetic skewed RDF workloads.

Terms are drawn from a Zipf(s) distribution over ``U`` synthetic IRIs
(s = 0 is uniform). Alongside the dataset a ``.stats.json`` sidecar records
the exact plain size and distinct-term totals so output sizes can be
predicted.
"""
import gzip
import json
from pathlib import Path

import numpy as np

from .storage import HEADER

IRI_PREFIX = b"http://example.org/"
ARITY_MIXED = 0


def zipf_probabilities(n_terms: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, n_terms + 1, dtype=np.float64)
    w = ranks ** -exponent
    return w / w.sum()


def harmonic(n: int, exponent: float = 1.0) -> float:
    return float(np.sum(np.arange(1, n + 1, dtype=np.float64) ** -exponent))


def term_width(n_terms, mean_term_len):
    digits = len(str(max(n_terms - 1, 0)))
    return max(digits, mean_term_len - len(IRI_PREFIX) - 1)


def make_term(rank: int, width: int) -> bytes:
    return IRI_PREFIX + b"r" + str(rank).encode().rjust(width, b"0")


def make_literal(rank: int) -> bytes:
    return b'"value %d"@en' % rank


def sidecar_path(path) -> Path:
    return Path(str(path) + ".stats.json")


def generate(path, statements: int, distinct_terms: int, zipf_exponent: float = 1.0, seed: int = 0,
             arity: int = 3, mean_term_len: int = 40, literal_fraction: float = 0.0,
             rank_offset: int = 0) -> dict:
    """Write a dataset to ``path`` (gzip when it ends in ``.gz``) and return its stats.

    ``arity`` is 3, 4 or 0 for a random triple/quad mix. ``rank_offset``
    shifts the IRI vocabulary, so two datasets with offsets 0 and U/2 share
    half their terms.
    """
    if arity not in (0, 3, 4):
        raise ValueError("arity must be 3, 4 or 0 (mixed)")
    if distinct_terms < 1:
        raise ValueError("need at least one distinct term")
    rng = np.random.default_rng(seed)
    N, U = statements, distinct_terms
    if arity == ARITY_MIXED:
        arities = rng.integers(3, 5, size=N).astype(np.int64)
    else:
        arities = np.full(N, arity, dtype=np.int64)
    draws = int(arities.sum())
    probs = zipf_probabilities(U, zipf_exponent)
    ranks = rng.choice(U, size=draws, p=probs) if draws else np.zeros(0, dtype=np.int64)
    # object slots (third term) optionally become literals
    offsets = np.concatenate([[0], np.cumsum(arities)[:-1]]) if N else np.zeros(0, dtype=np.int64)
    is_lit = np.zeros(draws, dtype=bool)
    if literal_fraction > 0 and N:
        is_lit[offsets + 2] = rng.random(N) < literal_fraction
    width = term_width(U + rank_offset, mean_term_len)
    iri_len = len(make_term(0, width))
    keys = np.where(is_lit, ranks + U, ranks)
    uniq, counts = np.unique(keys, return_counts=True)
    lit_ranks = uniq[uniq >= U] - U
    n_iri = int(np.count_nonzero(uniq < U))
    distinct_bytes = n_iri * iri_len + sum(len(make_literal(int(r) + rank_offset)) for r in lit_ranks)

    iris = [b"<" + make_term(r + rank_offset, width) + b">" for r in range(U)]
    ranks_l = ranks.tolist()
    lit_l = is_lit.tolist()
    ar_l = arities.tolist()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    opener = gzip.open if str(path).endswith(".gz") else open
    plain = 0
    triples = quads = 0
    pos = 0
    with opener(path, "wb") as fh:
        buf = []
        for a in ar_l:
            terms = [iris[ranks_l[pos + k]] for k in range(a)]
            if lit_l[pos + 2]:
                terms[2] = make_literal(ranks_l[pos + 2] + rank_offset)
            line = b" ".join(terms) + b" .\n"
            buf.append(line)
            plain += len(line)
            pos += a
            if a == 3:
                triples += 1
            else:
                quads += 1
            if len(buf) >= 65536:
                fh.write(b"".join(buf))
                buf.clear()
        fh.write(b"".join(buf))
    stats = {
        "statements": N,
        "triples": triples,
        "quads": quads,
        "term_occurrences": draws,
        "distinct_terms": int(len(uniq)),
        "distinct_term_bytes": int(distinct_bytes),
        "plain_bytes": plain,
        "top_term_count": int(counts.max()) if len(counts) else 0,
        "params": {"statements": N, "distinct_terms": U, "zipf_exponent": zipf_exponent, "seed": seed,
                   "arity": arity, "mean_term_len": mean_term_len, "literal_fraction": literal_fraction,
                   "rank_offset": rank_offset},
    }
    sidecar_path(path).write_text(json.dumps(stats, indent=2, sort_keys=True))
    return stats


def _digits_sum(count, places, place):
    """Total decimal digits of ids (k+1)*P + place for k < count."""
    total = 0
    k = 0
    while k < count:
        first = (k + 1) * places + place
        d = len(str(first))
        # last ordinal whose id still has d digits
        last_k = min(count - 1, (10 ** d - 1 - place) // places - 1)
        total += d * (last_k - k + 1)
        k = last_k + 1
    return total


def predict_output(stats: dict, places: int) -> dict:
    """Predicted encoded/dictionary sizes and ratio for a run with ``places`` places.

    Assumes owned terms are split evenly over places; only the decimal id
    widths depend on that.
    """
    D = stats["distinct_terms"]
    body = 8 * (3 * stats["triples"] + 4 * stats["quads"])
    encoded = body + HEADER.size * places
    if stats["triples"] and stats["quads"]:
        encoded += stats["statements"]
    base, extra = divmod(D, places)
    digits = sum(_digits_sum(base + (1 if p < extra else 0), places, p) for p in range(places))
    dict_bytes = stats["distinct_term_bytes"] + 2 * D + digits
    return {"encoded_bytes": encoded, "dictionary_bytes": dict_bytes,
            "ratio": stats["plain_bytes"] / (encoded + dict_bytes)}


def load_stats(path) -> dict:
    return json.loads(sidecar_path(path).read_text())
