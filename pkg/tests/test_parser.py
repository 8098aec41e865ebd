import gzip

import pytest

from tripress.errors import ParseError, TripressError
from tripress.parser import ParseStats, parse_statement, stream_chunks


def test_parse_triple():
    assert parse_statement(b"<http://a> <http://p> <http://b> .") == (b"http://a", b"http://p", b"http://b")


def test_parse_literal_kept_verbatim():
    assert parse_statement(b'<http://a> <http://p> "x"@en .') == (b"http://a", b"http://p", b'"x"@en')


def test_parse_quad():
    st = parse_statement(b"<http://a> <http://p> <http://b> <http://g> .")
    assert len(st) == 4 and st[3] == b"http://g"


def test_comment_and_blank_skipped():
    assert parse_statement(b"# hello") is None
    assert parse_statement(b"   ") is None


def test_parse_error_carries_location():
    with pytest.raises(ParseError) as info:
        parse_statement(b"<http://a> oops .", "f.nt", 12)
    assert info.value.line_no == 12 and info.value.source == "f.nt"


def _write(path, n, bad_at=None):
    lines = []
    for i in range(n):
        lines.append(b"<http://s/%d> <http://p> <http://o/%d> .\n" % (i, i))
        if bad_at == i:
            lines.append(b"not a statement\n")
    path.write_bytes(b"# header\n" + b"".join(lines))
    return path


def test_chunk_sizes(tmp_path):
    chunks = list(stream_chunks([_write(tmp_path / "d.nt", 10)], 4))
    assert [len(c) for c in chunks] == [4, 4, 2]
    assert [c.ordinal for c in chunks] == [0, 1, 2]


def test_chunks_reproduce_input(tmp_path):
    p = _write(tmp_path / "d.nt", 23)
    flat = [st for c in stream_chunks([p], 5) for st in c.statements]
    assert flat == [(b"http://s/%d" % i, b"http://p", b"http://o/%d" % i) for i in range(23)]


def test_gzip_transparent(tmp_path):
    p = _write(tmp_path / "d.nt", 50)
    gz = tmp_path / "d.nt.gz"
    gz.write_bytes(gzip.compress(p.read_bytes()))
    plain = [c.statements for c in stream_chunks([p], 7)]
    packed = [c.statements for c in stream_chunks([gz], 7)]
    assert plain == packed


def test_last_chunk_per_file_may_be_short(tmp_path):
    a = _write(tmp_path / "a.nt", 5)
    b = _write(tmp_path / "b.nt", 5)
    chunks = list(stream_chunks([a, b], 4))
    assert [len(c) for c in chunks] == [4, 1, 4, 1]
    assert [c.ordinal for c in chunks] == [0, 1, 2, 3]


def test_bad_line_aborts_by_default(tmp_path):
    p = _write(tmp_path / "d.nt", 10, bad_at=3)
    with pytest.raises(ParseError) as info:
        list(stream_chunks([p], 4))
    assert info.value.line_no == 6


def test_skip_bad_counts(tmp_path):
    p = _write(tmp_path / "d.nt", 10, bad_at=3)
    stats = ParseStats()
    chunks = list(stream_chunks([p], 4, skip_bad=True, stats=stats))
    assert sum(len(c) for c in chunks) == 10
    assert stats.skipped_bad == 1
    assert stats.plain_bytes == p.stat().st_size


def test_missing_file_names_path(tmp_path):
    with pytest.raises(TripressError, match="nope.nt"):
        list(stream_chunks([tmp_path / "nope.nt"], 4))


def test_paper_chunk_size(tmp_path):
    # 1M statements in chunks of 140K -> 8 chunks, the first 7 full
    p = tmp_path / "m.nt"
    with open(p, "wb") as fh:
        for base in range(0, 1_000_000, 100_000):
            fh.write(b"".join(b"<http://s/%d> <http://p> <http://o> .\n" % i for i in range(base, base + 100_000)))
    sizes = [len(c) for c in stream_chunks([p], 140_000)]
    assert len(sizes) == 8
    assert sizes[:7] == [140_000] * 7 and sizes[7] == 20_000
