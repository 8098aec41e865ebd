"""Benchmarks: runtime versus place count, and compiled versus pure-Python kernels."""
import shutil
import tempfile
import time
from pathlib import Path

from . import kernels
from .orchestrator import RunConfig, run_encoding


def bench_places(paths, places_list, chunk_size=100_000, chunks_per_loop=1, backend="inproc", repeat=1):
    """Return rows ``{"places", "seconds", "speedup"}``; speedup is relative to the first entry."""
    rows = []
    base = None
    for P in places_list:
        best = None
        for _ in range(repeat):
            out = Path(tempfile.mkdtemp(prefix="tripress-bench-"))
            procs = []
            try:
                cfg = RunConfig(places=P, chunk_size=chunk_size, chunks_per_loop=chunks_per_loop,
                                input_paths=list(paths), output_dir=out)
                if backend == "tcp-local":
                    from .tcp import spawn_local_workers
                    cfg.hosts, procs = spawn_local_workers(P)
                t0 = time.perf_counter()
                run_encoding(cfg)
                dt = time.perf_counter() - t0
            finally:
                for proc in procs:
                    proc.wait(timeout=60)
                shutil.rmtree(out, ignore_errors=True)
            best = dt if best is None else min(best, dt)
        if base is None:
            base = best
        rows.append({"places": P, "seconds": best, "speedup": base / best})
    return rows


def _time(fn, *args):
    t0 = time.perf_counter()
    fn(*args)
    return time.perf_counter() - t0


def bench_kernels(lines, place_count=8):
    """Time each kernel over ``lines`` for every available implementation."""
    rows = []
    for impl in kernels.available():
        split = impl.split_statement
        stmts = []
        t_parse = _time(lambda: stmts.extend(split(l) for l in lines))
        terms = [t for st in stmts if st for t in st]
        groups = [[] for _ in range(place_count)]
        t_route = _time(impl.route_terms, terms, place_count, set(), groups)
        owned = groups[0]
        t_encode = _time(impl.encode_terms, owned, {}, 0, place_count, 0, [])
        rows.append({"kernels": impl.IMPLEMENTATION, "parse": t_parse, "route": t_route, "encode": t_encode,
                     "lines": len(lines), "terms": len(terms)})
    return rows


def format_rows(rows, columns):
    out = ["  ".join(f"{c:>10}" for c in columns)]
    for r in rows:
        cells = []
        for c in columns:
            v = r[c]
            cells.append(f"{v:>10.3f}" if isinstance(v, float) else f"{v!s:>10}")
        out.append("  ".join(cells))
    return "\n".join(out)
