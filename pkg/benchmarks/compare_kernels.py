"""Compiled vs pure-Python kernels: microbenchmarks plus an end-to-end encode.

Each implementation runs in its own interpreter because the kernel choice
is made at import time (TRIPRESS_PURE_PYTHON=1 forces the fallback).

    python benchmarks/compare_kernels.py --statements 500000 --places 4
"""
import argparse
import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

CHILD = r"""
import json, sys, time
from pathlib import Path
from tripress import kernels
from tripress.bench import bench_kernels
from tripress.orchestrator import RunConfig, run_encoding
data, out, places = Path(sys.argv[1]), Path(sys.argv[2]), int(sys.argv[3])
lines = open(data, "rb").readlines()
micro = [r for r in bench_kernels(lines, places) if r["kernels"] == kernels.IMPLEMENTATION][0]
t0 = time.perf_counter()
run_encoding(RunConfig(places=places, chunk_size=100_000, input_paths=[data], output_dir=out))
micro["end_to_end"] = time.perf_counter() - t0
print(json.dumps(micro))
"""


def run(impl, data, out, places):
    env = dict(os.environ)
    if impl == "python":
        env["TRIPRESS_PURE_PYTHON"] = "1"
    else:
        env.pop("TRIPRESS_PURE_PYTHON", None)
    res = subprocess.run([sys.executable, "-c", CHILD, str(data), str(out), str(places)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--statements", type=int, default=200_000)
    ap.add_argument("--places", type=int, default=4)
    args = ap.parse_args()

    from tripress import kernels
    from tripress.bench import format_rows
    from tripress.generate import generate

    impls = [m.IMPLEMENTATION for m in kernels.available()]
    if "compiled" not in impls:
        print("compiled kernels not built; only the fallback is measured")
    with tempfile.TemporaryDirectory(prefix="tripress-kbench-") as tmp:
        data = Path(tmp) / "bench.nt"
        generate(data, args.statements, max(1, args.statements // 4), 1.0, 0)
        rows = [run(impl, data, Path(tmp) / f"out-{impl}", args.places) for impl in impls]
    print(format_rows(rows, ["kernels", "lines", "parse", "route", "encode", "end_to_end"]))
    if len(rows) == 2:
        c, p = rows
        print("speedup of compiled: " + ", ".join(f"{k} {p[k] / c[k]:.2f}x"
                                                  for k in ("parse", "route", "encode", "end_to_end")))


if __name__ == "__main__":
    main()
