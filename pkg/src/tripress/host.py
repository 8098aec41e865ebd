"""Runs the four per-loop phases for the places living in one process.

``PlaceHost`` owns a set of places and their output writers. Message
delivery goes through ``route_terms`` / ``route_ids``: local destinations
are handed over directly, anything else goes to the ``remote`` sender (the
TCP backend). ``InProcessCluster`` hosts every place in this process and runs
one activity per place per phase on a thread pool; returning from a phase
is the barrier.
"""
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

from .engine import PlaceState
from .errors import TransportError
from .storage import DictionaryWriter, EncodedWriter, dict_name
from .transport import IdGroupMsg, TermGroupMsg

PHASES = ("filter", "push", "encode", "compress")


@dataclass
class OutputSpec:
    directory: Path
    gzip: bool = False
    in_memory: bool = False
    # existing dictionary directory whose files seed the new ones (update mode)
    seed_dir: Optional[Path] = None


@dataclass
class PhaseEvent:
    loop: int
    phase: str
    place: int
    start: float
    end: float


class PlaceOutput:
    def __init__(self, spec: OutputSpec, place: int, places: int, seed: Optional[Path] = None):
        self.dictionary = DictionaryWriter(spec.directory / dict_name(place, spec.gzip), spec.gzip,
                                           spec.in_memory, seed)
        self.encoded = EncodedWriter(spec.directory, place, places, spec.gzip, spec.in_memory)
        self._dict_path = spec.directory / dict_name(place, spec.gzip)

    def close(self) -> List[Path]:
        self.dictionary.close()
        return [self._dict_path] + self.encoded.close()


class PlaceHost:
    def __init__(self, states: Dict[int, PlaceState], outputs: Optional[Dict[int, PlaceOutput]] = None,
                 threads: bool = True, remote: Optional[Callable] = None):
        self.states = states
        self.outputs = outputs or {}
        self.places = sorted(states)
        self.remote = remote
        self.events: List[PhaseEvent] = []
        self._locks = {p: threading.Lock() for p in states}
        self._arrived = threading.Condition()
        self._failure: Optional[BaseException] = None
        workers = len(states) if threads else 1
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="place") if workers > 1 else None

    # -- delivery -----------------------------------------------------

    def route_terms(self, msg: TermGroupMsg):
        if msg.dest in self.states:
            self.deliver_terms(msg)
        elif self.remote is None:
            raise TransportError(f"no route to place {msg.dest}")
        else:
            self.remote(msg)

    def route_ids(self, msg: IdGroupMsg):
        if msg.dest in self.states:
            self.deliver_ids(msg)
        elif self.remote is None:
            raise TransportError(f"no route to place {msg.dest}")
        else:
            self.remote(msg)

    def deliver_terms(self, msg: TermGroupMsg, payload_bytes=None):
        with self._locks[msg.dest]:
            self.states[msg.dest].receive_terms(msg, payload_bytes)
        with self._arrived:
            self._arrived.notify_all()

    def deliver_ids(self, msg: IdGroupMsg):
        with self._locks[msg.dest]:
            self.states[msg.dest].receive_ids(msg)
        with self._arrived:
            self._arrived.notify_all()

    def fail(self, exc: BaseException):
        """Called by receiver threads; wakes any phase waiting for deliveries."""
        with self._arrived:
            if self._failure is None:
                self._failure = exc
            self._arrived.notify_all()

    def _wait_for(self, predicate, timeout):
        deadline = time.monotonic() + timeout
        with self._arrived:
            while not predicate():
                if self._failure is not None:
                    raise TransportError(f"peer failure: {self._failure}") from self._failure
                left = deadline - time.monotonic()
                if left <= 0:
                    raise TransportError("timed out waiting for peer messages")
                self._arrived.wait(min(left, 1.0))
        if self._failure is not None:
            raise TransportError(f"peer failure: {self._failure}") from self._failure

    # -- phases -------------------------------------------------------

    def _each(self, loop, phase, fn, places=None):
        places = self.places if places is None else places

        def activity(p):
            t0 = time.perf_counter()
            fn(p)
            t1 = time.perf_counter()
            self.states[p].metrics.add_time(phase, t1 - t0)
            self.events.append(PhaseEvent(loop, phase, p, t0, t1))

        if self._pool is None or len(places) < 2:
            for p in places:
                activity(p)
        else:
            for f in [self._pool.submit(activity, p) for p in places]:
                f.result()

    def phase_filter(self, loop, chunks_by_place: Dict[int, list]):
        def run(p):
            state = self.states[p]
            state.begin_loop(loop)
            for chunk in chunks_by_place.get(p, ()):
                state.filter_and_collect(chunk)
        self._each(loop, "filter", run)

    def phase_push(self, loop, timeout=600.0):
        def run(p):
            for msg in self.states[p].outgoing_messages():
                self.route_terms(msg)
        self._each(loop, "push", run)
        self._wait_for(lambda: all(x is not None for p in self.places for x in self.states[p].inbox), timeout)

    def phase_encode(self, loop, timeout=600.0):
        def run(p):
            state = self.states[p]
            replies = state.encode_inbox()
            journal = state.drain_journal()
            out = self.outputs.get(p)
            if out is not None:
                out.dictionary.append_many(journal)
            for msg in replies:
                self.route_ids(msg)
        self._each(loop, "encode", run)
        self._wait_for(lambda: all(x is not None for p in self.places for x in self.states[p].pulled), timeout)

    def phase_compress(self, loop):
        def run(p):
            state = self.states[p]
            table = state.merge_mappings()
            flat = state.compress(table)
            del table
            out = self.outputs.get(p)
            if out is not None:
                out.encoded.write_flat(flat, state.arities)
        self._each(loop, "compress", run)

    def run_phase(self, name, loop, payload=None):
        if name == "filter":
            self.phase_filter(loop, payload or {})
        elif name == "push":
            self.phase_push(loop)
        elif name == "encode":
            self.phase_encode(loop)
        elif name == "compress":
            self.phase_compress(loop)
        else:
            raise ValueError(f"unknown phase {name!r}")

    def finish(self) -> Dict[int, List[Path]]:
        files = {p: out.close() for p, out in self.outputs.items()}
        self.outputs = {}
        return files

    def shutdown(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None


class InProcessCluster:
    """All places in this process."""

    backend = "inproc"

    def __init__(self, states: List[PlaceState], output: Optional[OutputSpec], threads=True):
        self.place_count = len(states)
        outputs = {}
        if output is not None:
            for s in states:
                seed = None
                if output.seed_dir is not None:
                    from .storage import find_file
                    seed = find_file(output.seed_dir, dict_name(s.place_index))
                outputs[s.place_index] = PlaceOutput(output, s.place_index, self.place_count, seed)
        self.host = PlaceHost({s.place_index: s for s in states}, outputs, threads=threads)

    @property
    def events(self):
        return self.host.events

    def run_phase(self, name, loop, payload=None):
        self.host.run_phase(name, loop, payload)

    def metrics(self):
        return [self.host.states[p].metrics for p in self.host.places]

    def dictionary_sizes(self):
        return [len(self.host.states[p].dictionary) for p in self.host.places]

    def finish(self):
        files = self.host.finish()
        return [f for p in sorted(files) for f in files[p]]

    def close(self):
        self.host.shutdown()
