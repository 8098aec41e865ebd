"""Push/pull messages between places and their wire frames.

Frame layout (little-endian)::

    u8 kind (1=terms, 2=ids) | u32 origin | u32 dest | u64 loop | u64 count
    terms: count x (u32 length, bytes)      ids: count x u64

On TCP every frame is preceded by a u32 total length.
"""
import socket
import struct
import sys
from array import array
from dataclasses import dataclass
from typing import List, Union

from .errors import ProtocolError, TransportError

KIND_TERMS = 1
KIND_IDS = 2

HEADER = struct.Struct("<BIIQQ")
_U32 = struct.Struct("<I")
_BIG_ENDIAN = sys.byteorder == "big"


@dataclass(frozen=True)
class TermGroupMsg:
    origin: int
    dest: int
    loop_ordinal: int
    terms: List[bytes]


@dataclass(frozen=True)
class IdGroupMsg:
    origin: int
    dest: int
    loop_ordinal: int
    ids: List[int]


Message = Union[TermGroupMsg, IdGroupMsg]


def term_payload_size(terms) -> int:
    """Bytes the term list occupies in a frame body."""
    return 4 * len(terms) + sum(map(len, terms))


def encode_frame(msg: Message) -> bytes:
    if isinstance(msg, TermGroupMsg):
        parts = [HEADER.pack(KIND_TERMS, msg.origin, msg.dest, msg.loop_ordinal, len(msg.terms))]
        pack = _U32.pack
        for t in msg.terms:
            parts.append(pack(len(t)))
            parts.append(t)
        return b"".join(parts)
    body = array("Q", msg.ids)
    if _BIG_ENDIAN:
        body.byteswap()
    return HEADER.pack(KIND_IDS, msg.origin, msg.dest, msg.loop_ordinal, len(body)) + body.tobytes()


def decode_frame(frame) -> Message:
    view = memoryview(frame)
    if len(view) < HEADER.size:
        raise ProtocolError(f"truncated frame header ({len(view)} bytes)")
    kind, origin, dest, loop, count = HEADER.unpack_from(view)
    pos = HEADER.size
    if kind == KIND_TERMS:
        terms = []
        unpack = _U32.unpack_from
        end = len(view)
        for _ in range(count):
            if pos + 4 > end:
                raise ProtocolError("truncated term frame")
            (n,) = unpack(view, pos)
            pos += 4
            if pos + n > end:
                raise ProtocolError("truncated term frame")
            terms.append(bytes(view[pos:pos + n]))
            pos += n
        if pos != end:
            raise ProtocolError(f"{end - pos} trailing bytes in term frame")
        return TermGroupMsg(origin, dest, loop, terms)
    if kind == KIND_IDS:
        if len(view) - pos != 8 * count:
            raise ProtocolError("id frame length does not match count")
        ids = array("Q")
        ids.frombytes(view[pos:])
        if _BIG_ENDIAN:
            ids.byteswap()
        return IdGroupMsg(origin, dest, loop, ids.tolist())
    raise ProtocolError(f"unknown frame kind {kind}")


def payload_size(frame) -> int:
    return len(frame) - HEADER.size


def send_frame(sock: socket.socket, frame: bytes):
    try:
        sock.sendall(_U32.pack(len(frame)) + frame if len(frame) < 65536 else _U32.pack(len(frame)))
        if len(frame) >= 65536:
            sock.sendall(frame)
    except OSError as exc:
        raise TransportError(f"send failed: {exc}") from exc


def _recv_exact(sock, n) -> bytearray:
    buf = bytearray(n)
    view = memoryview(buf)
    got = 0
    while got < n:
        k = sock.recv_into(view[got:], n - got)
        if k == 0:
            raise EOFError("connection closed")
        got += k
    return buf


def recv_frame(sock: socket.socket) -> bytearray:
    """Next length-prefixed frame; EOFError when the peer closed cleanly."""
    try:
        head = sock.recv(4, socket.MSG_WAITALL)
    except OSError as exc:
        raise TransportError(f"receive failed: {exc}") from exc
    if not head:
        raise EOFError("connection closed")
    if len(head) < 4:
        head += _recv_exact(sock, 4 - len(head))
    (n,) = _U32.unpack(head)
    try:
        return _recv_exact(sock, n)
    except OSError as exc:
        raise TransportError(f"receive failed: {exc}") from exc
