import pytest
from hypothesis import given, strategies as st

from tripress.errors import ProtocolError
from tripress.host import InProcessCluster
from tripress.engine import PlaceState
from tripress.parser import Chunk
from tripress.transport import (HEADER, IdGroupMsg, TermGroupMsg, decode_frame, encode_frame, payload_size,
                                term_payload_size)

terms_st = st.lists(st.binary(min_size=1, max_size=60), max_size=30)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1), st.integers(0, 2**64 - 1), terms_st)
def test_term_frame_round_trip(origin, dest, loop, terms):
    msg = TermGroupMsg(origin, dest, loop, terms)
    frame = encode_frame(msg)
    assert decode_frame(frame) == msg
    assert payload_size(frame) == term_payload_size(terms)


@given(st.lists(st.integers(0, 2**64 - 1), max_size=50))
def test_id_frame_round_trip(ids):
    msg = IdGroupMsg(3, 1, 7, ids)
    frame = encode_frame(msg)
    assert decode_frame(frame) == msg
    assert len(frame) == HEADER.size + 8 * len(ids)


def test_frame_layout_is_little_endian():
    frame = encode_frame(TermGroupMsg(1, 2, 3, [b"ab"]))
    assert frame == bytes([1]) + (1).to_bytes(4, "little") + (2).to_bytes(4, "little") + \
        (3).to_bytes(8, "little") + (1).to_bytes(8, "little") + (2).to_bytes(4, "little") + b"ab"
    ids = encode_frame(IdGroupMsg(0, 1, 0, [4]))
    assert ids[0] == 2 and ids[-8:] == (4).to_bytes(8, "little")


def test_empty_groups():
    assert decode_frame(encode_frame(TermGroupMsg(0, 1, 0, []))).terms == []
    assert decode_frame(encode_frame(IdGroupMsg(0, 1, 0, []))).ids == []


@pytest.mark.parametrize("bad", [b"", b"\x01" + b"\x00" * 10, encode_frame(TermGroupMsg(0, 1, 0, [b"abc"]))[:-1],
                                 b"\x09" + b"\x00" * 24])
def test_corrupt_frames(bad):
    with pytest.raises(ProtocolError):
        decode_frame(bad)


def _cluster(P):
    return InProcessCluster([PlaceState(p, P) for p in range(P)], None)


def test_message_counts_per_loop():
    P = 3
    cluster = _cluster(P)
    host = cluster.host
    sent_terms, sent_ids = [], []
    orig_t, orig_i = host.route_terms, host.route_ids
    host.route_terms = lambda m: (sent_terms.append(m), orig_t(m))
    host.route_ids = lambda m: (sent_ids.append(m), orig_i(m))
    cluster.run_phase("filter", 0, {0: [Chunk([(b"a", b"b", b"c")])]})
    for ph in ("push", "encode", "compress"):
        cluster.run_phase(ph, 0)
    assert len(sent_terms) == P * P and len(sent_ids) == P * P
    assert len({(m.origin, m.dest) for m in sent_terms}) == P * P
    assert len({(m.origin, m.dest) for m in sent_ids}) == P * P
    cluster.close()


def test_received_bytes_match_payloads():
    P = 4
    cluster = _cluster(P)
    stmts = [(b"s%d" % i, b"p%d" % (i % 7), b"o%d" % (i * 3)) for i in range(400)]
    cluster.run_phase("filter", 0, {p: [Chunk(stmts[p::P])] for p in range(P)})
    states = cluster.host.states
    expected = [0] * P
    for s in states.values():
        for d, group in enumerate(s.outgoing):
            if d != s.place_index:
                expected[d] += payload_size(encode_frame(TermGroupMsg(s.place_index, d, 0, group)))
    cluster.run_phase("push", 0)
    assert [states[p].metrics.received_bytes for p in range(P)] == expected
    cluster.close()


def test_pulled_ids_align_with_outgoing():
    P = 2
    cluster = _cluster(P)
    cluster.run_phase("filter", 0, {0: [Chunk([(b"a", b"b", b"c"), (b"d", b"e", b"a")])]})
    cluster.run_phase("push", 0)
    cluster.run_phase("encode", 0)
    s0 = cluster.host.states[0]
    for d in range(P):
        owner = cluster.host.states[d]
        assert s0.pulled[d] == [owner.dictionary[t] for t in s0.outgoing[d]]
    cluster.close()
