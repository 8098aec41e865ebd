import random
from pathlib import Path

import pytest

from tripress import kernels
from tripress.terms import serialize_statement


@pytest.fixture(params=kernels.available(), ids=lambda m: m.IMPLEMENTATION)
def kernel_impl(request):
    return request.param


def random_term(rng, kind=None):
    kind = kind or rng.choice(["iri", "iri", "iri", "bnode", "literal"])
    if kind == "iri":
        return b"http://ex.org/%s/%d" % (rng.choice([b"a", b"b", b"\xc3\xa9t\xc3\xa9"]), rng.randrange(300))
    if kind == "bnode":
        return b"_:b%d" % rng.randrange(50)
    body = rng.choice([b"plain", b"with space", b'esc \\"q\\" \\\\', b"\xe2\x82\xac uni", b""])
    suffix = rng.choice([b"", b"@en", b"@en-GB", b"^^<http://www.w3.org/2001/XMLSchema#string>"])
    return b'"' + body + b"%d" % rng.randrange(40) + b'"' + suffix


def random_statement(rng, arity=None):
    arity = arity or rng.choice([3, 4])
    s = random_term(rng, rng.choice(["iri", "iri", "bnode"]))
    p = random_term(rng, "iri")
    o = random_term(rng)
    st = [s, p, o]
    if arity == 4:
        st.append(random_term(rng, rng.choice(["iri", "bnode"])))
    return tuple(st)


def random_dataset(seed, n, arity=None):
    rng = random.Random(seed)
    return [random_statement(rng, arity) for _ in range(n)]


def write_dataset(path: Path, statements):
    path.write_bytes(b"".join(serialize_statement(s) for s in statements))
    return path


@pytest.fixture
def small_dataset(tmp_path):
    stmts = random_dataset(7, 500)
    return write_dataset(tmp_path / "small.nq", stmts), stmts


# (criterion, passed, detail) lines recorded by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {detail}")
