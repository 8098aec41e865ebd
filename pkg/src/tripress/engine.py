"""Per-place encoding state machine.

One ``PlaceState`` per place. Each loop iteration runs, in order:
``begin_loop`` -> ``filter_and_collect`` (per chunk) -> ``outgoing_messages``
-> ``receive_terms`` (from every origin) -> ``encode_owned_terms`` (origins
0..P-1) -> ``receive_ids`` -> ``merge_mappings`` -> ``compress``.
"""
from array import array
from typing import Dict, List, Optional, Sequence

from . import kernels
from .errors import CapacityError, ConsistencyError, ProtocolError
from .metrics import MetricCounters
from .parser import Chunk
from .terms import MAX_ID, EncodedStatement, Term, TermId
from .transport import IdGroupMsg, TermGroupMsg, term_payload_size


class PlaceState:
    def __init__(self, place_index: int, place_count: int,
                 dictionary: Optional[Dict[Term, TermId]] = None, next_ordinal: int = 0):
        if not 0 <= place_index < place_count:
            raise ValueError(f"place index {place_index} out of range for {place_count} places")
        self.place_index = place_index
        self.place_count = place_count
        self.dictionary: Dict[Term, TermId] = dictionary if dictionary is not None else {}
        self.next_ordinal = next_ordinal
        self.metrics = MetricCounters()
        self.loop_ordinal = -1
        # new (id, term) mappings not yet handed to storage
        self.journal: List[tuple] = []
        self.term_buffer: List[Term] = []
        self.arities: List[int] = []
        self.outgoing: List[List[Term]] = [[] for _ in range(place_count)]
        self.seen: set = set()
        self.inbox: List[Optional[List[Term]]] = [None] * place_count
        self.pulled: List[Optional[List[TermId]]] = [None] * place_count

    @classmethod
    def from_dictionary(cls, place_index, place_count, dictionary, max_owned_id):
        """Resume a place from a persisted dictionary."""
        if max_owned_id is None:
            ordinal = 0
        else:
            ordinal = (max_owned_id - place_index) // place_count
        return cls(place_index, place_count, dictionary, ordinal)

    def begin_loop(self, loop_ordinal: int):
        """Reset the per-loop buffers, reusing the list objects."""
        self.loop_ordinal = loop_ordinal
        self.term_buffer.clear()
        self.arities.clear()
        for g in self.outgoing:
            g.clear()
        self.seen.clear()
        for d in range(self.place_count):
            self.inbox[d] = None
            self.pulled[d] = None

    def filter_and_collect(self, chunk: Chunk):
        buf = self.term_buffer
        arities = self.arities
        n_terms = len(buf)
        for st in chunk.statements:
            buf.extend(st)
            arities.append(len(st))
        kernels.route_terms(buf[n_terms:] if n_terms else buf, self.place_count, self.seen, self.outgoing)
        self.metrics.parsed_terms += len(buf) - n_terms

    def outgoing_messages(self) -> List[TermGroupMsg]:
        """One message per destination, empty groups included."""
        msgs = []
        for d, group in enumerate(self.outgoing):
            if d == self.place_index:
                self.metrics.local_terms += len(group)
            else:
                self.metrics.outgoing_terms += len(group)
            msgs.append(TermGroupMsg(self.place_index, d, self.loop_ordinal, group))
        return msgs

    def receive_terms(self, msg: TermGroupMsg, payload_bytes: Optional[int] = None):
        if msg.dest != self.place_index or msg.loop_ordinal != self.loop_ordinal:
            raise ProtocolError(f"place {self.place_index} loop {self.loop_ordinal} got misrouted term group "
                                f"{msg.origin}->{msg.dest} loop {msg.loop_ordinal}")
        if self.inbox[msg.origin] is not None:
            raise ProtocolError(f"duplicate term group from place {msg.origin} at place {self.place_index}")
        self.inbox[msg.origin] = msg.terms
        if msg.origin != self.place_index:
            if payload_bytes is None:
                payload_bytes = term_payload_size(msg.terms)
            self.metrics.received_bytes += payload_bytes
            self.metrics.received_records += len(msg.terms)

    def encode_owned_terms(self, msg: TermGroupMsg) -> IdGroupMsg:
        """Encode one incoming group; the returned ids are aligned with ``msg.terms``."""
        terms = msg.terms
        if terms:
            P = self.place_count
            me = self.place_index
            for t, d in zip(terms, kernels.destinations(terms, P)):
                if d != me:
                    raise ProtocolError(f"place {me} asked to encode {t!r} owned by place {d}")
        try:
            ids, self.next_ordinal, misses = kernels.encode_terms(
                terms, self.dictionary, self.next_ordinal, self.place_count, self.place_index, self.journal)
        except OverflowError:
            raise CapacityError(f"place {self.place_index} exhausted the 64-bit id space") from None
        self.metrics.misses += misses
        self.metrics.hits += len(terms) - misses
        self.metrics.processed_terms += len(terms)
        return IdGroupMsg(self.place_index, msg.origin, msg.loop_ordinal, ids)

    def encode_inbox(self) -> List[IdGroupMsg]:
        """Encode every received group in origin order 0..P-1."""
        out = []
        for origin in range(self.place_count):
            terms = self.inbox[origin]
            if terms is None:
                raise ProtocolError(f"place {self.place_index} missing term group from place {origin}")
            out.append(self.encode_owned_terms(TermGroupMsg(origin, self.place_index, self.loop_ordinal, terms)))
            self.inbox[origin] = None
        return out

    def assign_id(self) -> TermId:
        self.next_ordinal += 1
        i = self.next_ordinal * self.place_count + self.place_index
        if i > MAX_ID:
            raise CapacityError(f"place {self.place_index} exhausted the 64-bit id space")
        return i

    def receive_ids(self, msg: IdGroupMsg):
        if msg.dest != self.place_index or msg.loop_ordinal != self.loop_ordinal:
            raise ProtocolError(f"place {self.place_index} got misrouted id group {msg.origin}->{msg.dest}")
        if self.pulled[msg.origin] is not None:
            raise ProtocolError(f"duplicate id group from place {msg.origin} at place {self.place_index}")
        self.pulled[msg.origin] = msg.ids

    def drain_journal(self) -> List[tuple]:
        j = self.journal
        self.journal = []
        return j

    def merge_mappings(self) -> Dict[Term, TermId]:
        """Transient term->id table for this loop's statements."""
        table: Dict[Term, TermId] = {}
        for d in range(self.place_count):
            ids = self.pulled[d]
            group = self.outgoing[d]
            if ids is None:
                raise ProtocolError(f"place {self.place_index} never received ids from place {d}")
            if len(ids) != len(group):
                raise ProtocolError(f"place {self.place_index}: {len(group)} terms sent to place {d} "
                                    f"but {len(ids)} ids came back")
            table.update(zip(group, ids))
        return table

    def compress(self, table: Dict[Term, TermId]) -> array:
        """Flat id array for the buffered statements, in input order."""
        try:
            flat = array("Q", [table[t] for t in self.term_buffer])
        except KeyError as exc:
            raise ConsistencyError(f"place {self.place_index}: term {exc.args[0]!r} has no id") from None
        self.metrics.encoded_statements += len(self.arities)
        return flat

    def compress_statements(self, table: Dict[Term, TermId]) -> List[EncodedStatement]:
        flat = self.compress(table)
        return list(regroup(flat, self.arities))


def regroup(flat: Sequence, arities: Sequence[int]):
    pos = 0
    for a in arities:
        yield tuple(flat[pos:pos + a])
        pos += a
