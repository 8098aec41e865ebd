"""Run driver: place setup, chunk loops, incremental update and small-batch transactions.

Every loop iteration takes up to ``places * chunks_per_loop`` chunks, hands
them to places round-robin (or shuffled with a seed) and runs the phases
filter -> push -> encode -> compress, each followed by a global barrier.
"""
import json
import logging
import os
import random
import statistics
import time
from dataclasses import asdict, dataclass, field
from itertools import islice
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from . import kernels
from .engine import PlaceState
from .errors import ConfigError, TripressError
from .host import PHASES, InProcessCluster, OutputSpec
from .metrics import aggregate, throughput
from .parser import DEFAULT_CHUNK_SIZE, Chunk, ParseStats, stream_chunks
from .storage import (MANIFEST, REPORT, compute_compression_ratio, detect_places, dict_name, find_file,
                      load_dictionary, write_manifest)

log = logging.getLogger(__name__)

PLACES_ENV = "TRIPRESS_PLACES"

# (loop ordinal, chunks of this loop, place count) -> place index per chunk
Assigner = Callable[[int, List[Chunk], int], List[int]]


@dataclass
class RunConfig:
    places: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE
    chunks_per_loop: int = 1
    input_paths: List[Path] = field(default_factory=list)
    output_dir: Optional[Path] = None
    mode: str = "fresh"
    hosts: Optional[List[Tuple[str, int]]] = None
    in_memory: bool = False
    gzip_output: bool = False
    shuffle_seed: Optional[int] = None
    skip_bad: bool = False
    metrics_per_loop: bool = False
    threads: bool = True
    assigner: Optional[Assigner] = None

    def validate(self):
        if self.places < 1:
            raise ConfigError(f"places must be >= 1, got {self.places}")
        if self.chunk_size < 1:
            raise ConfigError(f"chunk size must be >= 1, got {self.chunk_size}")
        if self.chunks_per_loop < 1:
            raise ConfigError(f"chunks per loop must be >= 1, got {self.chunks_per_loop}")
        if self.mode not in ("fresh", "update", "transactional"):
            raise ConfigError(f"unknown mode {self.mode!r}")

    def echo(self):
        d = asdict(self)
        d.pop("assigner")
        d["input_paths"] = [str(p) for p in self.input_paths]
        d["output_dir"] = str(self.output_dir) if self.output_dir is not None else None
        d["hosts"] = [f"{h}:{p}" for h, p in self.hosts] if self.hosts else None
        return d


@dataclass
class RunReport:
    config: dict
    loops: int = 0
    chunks: int = 0
    statements: int = 0
    plain_input_bytes: int = 0
    skipped_bad: int = 0
    runtime_seconds: float = 0.0
    phase_seconds: Dict[str, float] = field(default_factory=dict)
    place_metrics: List[dict] = field(default_factory=list)
    load: dict = field(default_factory=dict)
    files: Dict[str, int] = field(default_factory=dict)
    encoded_bytes: int = 0
    dictionary_bytes: int = 0
    compression_ratio: Optional[float] = None
    throughput: dict = field(default_factory=dict)
    dictionary_entries: int = 0
    new_mappings: int = 0
    backend: str = "inproc"
    kernels: str = kernels.IMPLEMENTATION
    per_loop_metrics: List[list] = field(default_factory=list)
    batch_latencies: List[dict] = field(default_factory=list)
    # (chunk ordinal, place, statements) in processing order; lets decode restore input order
    chunk_layout: List[list] = field(default_factory=list)
    error: Optional[str] = None
    # (loop, phase, place, start, end); kept out of the JSON
    events: List[tuple] = field(default_factory=list, repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("events")
        return d


def resolve_places(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get(PLACES_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{PLACES_ENV}={env!r} is not an integer") from None
    return 1


def make_states(places: Iterable[int], place_count: int, seed_dir=None) -> List[PlaceState]:
    states = []
    for p in places:
        if seed_dir is None:
            states.append(PlaceState(p, place_count))
            continue
        path = find_file(seed_dir, dict_name(p))
        if path is None:
            raise ConfigError(f"{seed_dir}: missing {dict_name(p)}")
        mapping, max_id = load_dictionary(path, p, place_count)
        states.append(PlaceState.from_dictionary(p, place_count, mapping, max_id))
    return states


def round_robin(loop: int, chunks: List[Chunk], place_count: int) -> List[int]:
    return [j % place_count for j in range(len(chunks))]


def open_cluster(config: RunConfig, output: Optional[OutputSpec], seed_dir=None):
    if config.hosts:
        from .tcp import TcpCluster
        return TcpCluster(config.hosts, config.places, output, seed_dir, config.threads)
    states = make_states(range(config.places), config.places, seed_dir)
    return InProcessCluster(states, output, config.threads)


class Session:
    """An open cluster plus the bookkeeping of one run."""

    def __init__(self, config: RunConfig, seed_dir=None):
        config.validate()
        self.config = config
        self.report = RunReport(config.echo())
        self.output = None
        if config.output_dir is not None:
            out = Path(config.output_dir)
            if seed_dir is not None and out.resolve() == Path(seed_dir).resolve():
                raise ConfigError("the output directory must differ from the dictionary directory")
            out.mkdir(parents=True, exist_ok=True)
            (out / MANIFEST).unlink(missing_ok=True)
            self.output = OutputSpec(out, config.gzip_output, config.in_memory,
                                     Path(seed_dir) if seed_dir is not None else None)
        self.cluster = open_cluster(config, self.output, seed_dir)
        self.report.backend = self.cluster.backend
        self.assigner = config.assigner
        self._rng = random.Random(config.shuffle_seed) if config.shuffle_seed is not None else None
        self._loop = 0
        self._t0 = time.perf_counter()
        self._base_entries = sum(self.cluster.dictionary_sizes()) if self.cluster.backend == "inproc" else None

    def assign(self, chunks: List[Chunk]) -> Dict[int, List[Chunk]]:
        P = self.config.places
        if self.assigner is not None:
            slots = self.assigner(self._loop, chunks, P)
        else:
            slots = round_robin(self._loop, chunks, P)
            if self._rng is not None:
                self._rng.shuffle(slots)
        by_place: Dict[int, List[Chunk]] = {}
        for chunk, p in zip(chunks, slots):
            if not 0 <= p < P:
                raise ConfigError(f"chunk assigner returned place {p} for {P} places")
            by_place.setdefault(p, []).append(chunk)
        for chunk, p in zip(chunks, slots):
            self.report.chunk_layout.append([chunk.ordinal, p, len(chunk)])
        return by_place

    def run_loop(self, chunks: List[Chunk]):
        """One loop iteration over ``chunks``; returns its wall time."""
        by_place = self.assign(chunks)
        start = time.perf_counter()
        for name in PHASES:
            t0 = time.perf_counter()
            self.cluster.run_phase(name, self._loop, by_place if name == "filter" else None)
            self.report.phase_seconds[name] = self.report.phase_seconds.get(name, 0.0) + time.perf_counter() - t0
        elapsed = time.perf_counter() - start
        self.report.loops += 1
        self.report.chunks += len(chunks)
        if self.config.metrics_per_loop and self.cluster.backend == "inproc":
            self.report.per_loop_metrics.append([m.snapshot() for m in self.cluster.metrics()])
        self._loop += 1
        return elapsed

    def run_chunks(self, chunks: Iterator[Chunk]):
        per_loop = self.config.places * self.config.chunks_per_loop
        while True:
            batch = list(islice(chunks, per_loop))
            if not batch:
                break
            self.run_loop(batch)

    def finish(self, stats: Optional[ParseStats] = None) -> RunReport:
        files = self.cluster.finish()
        rep = self.report
        rep.runtime_seconds = time.perf_counter() - self._t0
        counters = self.cluster.metrics()
        rep.place_metrics = [c.to_dict() for c in counters]
        rep.load = aggregate(counters).to_dict()
        rep.events = [(e.loop, e.phase, e.place, e.start, e.end) if hasattr(e, "loop") else tuple(e)
                      for e in self.cluster.events]
        rep.statements = sum(c.encoded_statements for c in counters)
        rep.new_mappings = sum(c.misses for c in counters)
        rep.dictionary_entries = sum(self.cluster.dictionary_sizes())
        if stats is not None:
            rep.plain_input_bytes = stats.plain_bytes
            rep.skipped_bad = stats.skipped_bad
        rep.throughput = throughput(rep.statements, rep.plain_input_bytes, rep.runtime_seconds)
        if self.output is not None:
            out = self.output.directory
            for f in files:
                rep.files[Path(f).name] = Path(f).stat().st_size
            rep.encoded_bytes = sum(v for k, v in rep.files.items() if k.startswith("data-"))
            rep.dictionary_bytes = sum(v for k, v in rep.files.items() if k.startswith("dict-"))
            if rep.plain_input_bytes and rep.encoded_bytes + rep.dictionary_bytes:
                rep.compression_ratio = compute_compression_ratio(
                    rep.plain_input_bytes, rep.encoded_bytes, rep.dictionary_bytes)
            (out / REPORT).write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
            write_manifest(out, self.config.places, list(rep.files) + [REPORT])
        return rep

    def abort(self, exc: BaseException):
        self.report.error = f"{type(exc).__name__}: {exc}"
        if self.output is not None:
            try:
                (self.output.directory / REPORT).write_text(json.dumps(self.report.to_dict(), indent=2,
                                                                        sort_keys=True, default=str))
            except OSError:
                log.exception("could not write diagnostics")

    def close(self):
        self.cluster.close()


def _run(config: RunConfig, chunks: Optional[Iterator[Chunk]], seed_dir=None) -> RunReport:
    stats = ParseStats()
    if chunks is None:
        chunks = stream_chunks(config.input_paths, config.chunk_size, config.skip_bad, stats)
    session = Session(config, seed_dir)
    try:
        session.run_chunks(chunks)
        return session.finish(stats)
    except BaseException as exc:
        session.abort(exc)
        raise
    finally:
        session.close()


def run_encoding(config: RunConfig, chunks: Optional[Iterator[Chunk]] = None) -> RunReport:
    """Encode ``config.input_paths`` (or the given chunk stream) from empty dictionaries."""
    return _run(config, chunks)


def _check_dict_dir(config: RunConfig, dict_dir):
    found = detect_places(dict_dir)
    if found != config.places:
        raise ConfigError(f"{dict_dir} holds dictionaries for {found} places, run configured for "
                          f"{config.places}; re-partitioning is not supported")


def run_update(config: RunConfig, existing_dict_dir, chunks: Optional[Iterator[Chunk]] = None) -> RunReport:
    """Encode new data against persisted dictionaries; known terms keep their ids."""
    _check_dict_dir(config, existing_dict_dir)
    return _run(config, chunks, Path(existing_dict_dir))


def run_transactional(config: RunConfig, batches: Iterable[Chunk], existing_dict_dir=None,
                      parallel: bool = False) -> RunReport:
    """Encode small batches one loop iteration at a time, timing each.

    With ``parallel`` up to ``places`` batches share a loop iteration, one
    per place, and each of them is charged the iteration's wall time.
    """
    if existing_dict_dir is not None:
        _check_dict_dir(config, existing_dict_dir)
    session = Session(config, existing_dict_dir)
    width = config.places if parallel else 1
    it = iter(batches)
    try:
        while True:
            group = list(islice(it, width))
            if not group:
                break
            nonempty = [b for b in group if len(b)]
            if parallel:
                session.assigner = lambda loop, chunks, P: list(range(len(chunks)))
            elapsed = session.run_loop(nonempty)
            for b in group:
                session.report.batch_latencies.append(
                    {"ordinal": b.ordinal, "statements": len(b), "seconds": elapsed})
        stats = ParseStats(statements=sum(x["statements"] for x in session.report.batch_latencies))
        return session.finish(stats)
    except BaseException as exc:
        session.abort(exc)
        raise
    finally:
        session.close()


def latency_by_size(report: RunReport) -> Dict[int, float]:
    """Median batch latency per batch size."""
    sizes: Dict[int, List[float]] = {}
    for rec in report.batch_latencies:
        sizes.setdefault(rec["statements"], []).append(rec["seconds"])
    return {k: statistics.median(v) for k, v in sorted(sizes.items())}
