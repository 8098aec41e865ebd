"""Command line entry point.

Exit codes: 0 success, 1 usage, 2 data error, 3 internal consistency violation.
"""
import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

from . import kernels
from .errors import ConfigError, TripressError
from .orchestrator import PLACES_ENV, RunConfig, resolve_places, run_encoding, run_transactional, run_update

log = logging.getLogger("tripress")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _places_list(text):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of integers: {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("place counts must be positive")
    return values


def _add_run_flags(p, require_in=True):
    p.add_argument("--places", type=int, default=None, help=f"place count (default: ${PLACES_ENV} or 1)")
    p.add_argument("--chunk-size", type=int, default=100_000, help="statements per chunk")
    p.add_argument("--chunks-per-loop", type=int, default=1, help="chunks per place per loop iteration")
    p.add_argument("--in", dest="inputs", nargs="+", required=require_in, type=Path, metavar="PATH")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--hosts", type=Path, help="file with one worker host:port per line")
    p.add_argument("--gzip-output", action="store_true")
    p.add_argument("--in-memory", action="store_true", help="hold outputs in memory until the run ends")
    p.add_argument("--shuffle-seed", type=int, default=None, help="randomize chunk-to-place assignment")
    p.add_argument("--skip-bad", action="store_true", help="count and skip malformed statements")
    p.add_argument("--metrics-per-loop", action="store_true")


def build_parser():
    parser = _Parser(prog="tripress", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="encode N-Triples/N-Quads files")
    _add_run_flags(p)

    p = sub.add_parser("update", help="encode new data against existing dictionaries")
    p.add_argument("--dict", required=True, type=Path, help="output directory of a previous run")
    _add_run_flags(p)

    p = sub.add_parser("txn", help="replay input as small transactional batches")
    p.add_argument("--dict", type=Path, help="output directory of a base run")
    p.add_argument("--batch-size", type=int, required=True)
    p.add_argument("--batches", type=int, required=True)
    p.add_argument("--parallel", action="store_true", help="run up to P batches per loop, one per place")
    _add_run_flags(p)

    p = sub.add_parser("decode", help="turn an output directory back into N-Triples/N-Quads")
    p.add_argument("run_dir", type=Path)
    p.add_argument("-o", "--output", type=Path, help="file to write (default stdout)")
    p.add_argument("--input-order", action="store_true", help="restore the input statement order")

    p = sub.add_parser("verify", help="check dictionary consistency of an output directory")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("oracle-encode", help="sequential single-dictionary encoding")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("gen", help="generate a Zipf-skewed synthetic dataset")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--statements", type=int, required=True)
    p.add_argument("--terms", type=int, required=True, help="size of the term universe")
    p.add_argument("--zipf", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--arity", choices=["3", "4", "mixed"], default="3")
    p.add_argument("--term-len", type=int, default=40)
    p.add_argument("--literal-fraction", type=float, default=0.0)
    p.add_argument("--rank-offset", type=int, default=0, help="shift the IRI vocabulary by this many ranks")

    p = sub.add_parser("stats", help="print the load report of a run")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("bench", help="runtime versus place count")
    p.add_argument("--places-list", type=_places_list, default=[1, 2, 4, 8])
    p.add_argument("--in", dest="inputs", nargs="+", type=Path)
    p.add_argument("--generate", type=int, default=None, metavar="N", help="generate N statements instead")
    p.add_argument("--chunk-size", type=int, default=100_000)
    p.add_argument("--chunks-per-loop", type=int, default=1)
    p.add_argument("--backend", choices=["inproc", "tcp-local"], default="inproc")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--kernels", action="store_true", help="compare compiled and pure-Python kernels instead")

    p = sub.add_parser("worker", help="serve places for the TCP backend")
    p.add_argument("--bind", default="127.0.0.1:0")
    p.add_argument("--once", action="store_true", help="exit after one session")
    return parser


def _config(args, mode):
    hosts = None
    if getattr(args, "hosts", None):
        from .tcp import read_hosts_file
        hosts = read_hosts_file(args.hosts)
    return RunConfig(
        places=resolve_places(args.places), chunk_size=args.chunk_size, chunks_per_loop=args.chunks_per_loop,
        input_paths=list(args.inputs or []), output_dir=args.out, mode=mode, hosts=hosts,
        in_memory=args.in_memory, gzip_output=args.gzip_output, shuffle_seed=args.shuffle_seed,
        skip_bad=args.skip_bad, metrics_per_loop=args.metrics_per_loop)


def _summary(rep):
    ratio = f"{rep.compression_ratio:.2f}" if rep.compression_ratio else "n/a"
    print(f"{rep.statements} statements, {rep.dictionary_entries} dictionary entries "
          f"({rep.new_mappings} new), {rep.loops} loops, {rep.runtime_seconds:.2f}s, ratio {ratio}")


def cmd_encode(args):
    _summary(run_encoding(_config(args, "fresh")))


def cmd_update(args):
    _summary(run_update(_config(args, "update"), args.dict))


def cmd_txn(args):
    from .parser import chunk_statements, iter_statements

    cfg = _config(args, "transactional")
    if args.batch_size < 0 or args.batches < 0:
        raise ConfigError("batch size and batch count must be non-negative")

    def statements():
        for path in cfg.input_paths:
            yield from iter_statements(path, cfg.skip_bad)

    def batches():
        it = statements()
        for k in range(args.batches):
            from itertools import islice
            from .parser import Chunk
            yield Chunk(list(islice(it, args.batch_size)), "txn", k)

    rep = run_transactional(cfg, batches(), args.dict, parallel=args.parallel)
    for rec in rep.batch_latencies:
        print(f"batch {rec['ordinal']}: {rec['statements']} statements, {rec['seconds'] * 1000:.2f} ms")
    _summary(rep)


def cmd_decode(args):
    from .terms import serialize_statement
    from .verify import decode, decode_to_file

    if args.output is not None:
        decode_to_file(args.run_dir, args.output, args.input_order)
        return
    out = sys.stdout.buffer
    for st in decode(args.run_dir, args.input_order):
        out.write(serialize_statement(st))
    out.flush()


def cmd_verify(args):
    from .verify import verify_run

    rep = verify_run(args.run_dir)
    if args.json:
        print(json.dumps(rep.to_dict(), indent=2))
    else:
        print(f"{rep.places} places, {rep.entries} entries, {rep.terms} distinct terms, "
              f"{len(rep.violations)} violations")
        for v in rep.violations[:50]:
            print(f"  {v.kind}: {v.detail}")
    return 0 if rep.ok else 3


def cmd_oracle(args):
    from .parser import iter_statements
    from .verify import sequential_encode

    stmts = (st for path in args.inputs for st in iter_statements(path))
    dictionary, encoded = sequential_encode(stmts)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "dict.tsv", "wb") as fh:
        fh.write(b"".join(b"%d\t%s\n" % (i, t) for t, i in dictionary.items()))
    with open(args.out / "data.txt", "w") as fh:
        fh.writelines(" ".join(map(str, row)) + "\n" for row in encoded)
    print(f"{len(encoded)} statements, {len(dictionary)} distinct terms")


def cmd_gen(args):
    from .generate import generate

    arity = 0 if args.arity == "mixed" else int(args.arity)
    stats = generate(args.out, args.statements, args.terms, args.zipf, args.seed, arity, args.term_len,
                     args.literal_fraction, args.rank_offset)
    print(f"wrote {stats['statements']} statements ({stats['plain_bytes']} bytes, "
          f"{stats['distinct_terms']} distinct terms) to {args.out}")


def cmd_stats(args):
    from .metrics import emit_report, load_report_from_dict

    path = args.run_dir / "report.json" if args.run_dir.is_dir() else args.run_dir
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise TripressError(f"cannot read run report {path}: {exc}") from exc
    text_json, table = emit_report(load_report_from_dict(doc["load"]), doc)
    print(text_json if args.json else table)


def cmd_bench(args):
    from .bench import bench_kernels, bench_places, format_rows

    tmp = None
    inputs = args.inputs
    if args.generate:
        from .generate import generate
        tmp = tempfile.TemporaryDirectory(prefix="tripress-bench-")
        path = Path(tmp.name) / "bench.nt"
        generate(path, args.generate, max(1, args.generate // 4), 1.0, 0)
        inputs = [path]
    if not inputs:
        raise ConfigError("bench needs --in or --generate")
    try:
        if args.kernels:
            lines = [l for p in inputs for l in open(p, "rb")]
            print(f"kernels in use: {kernels.IMPLEMENTATION}")
            print(format_rows(bench_kernels(lines), ["kernels", "lines", "parse", "route", "encode"]))
        else:
            rows = bench_places(inputs, args.places_list, args.chunk_size, args.chunks_per_loop, args.backend,
                                args.repeat)
            print(format_rows(rows, ["places", "seconds", "speedup"]))
    finally:
        if tmp is not None:
            tmp.cleanup()


def cmd_worker(args):
    from .tcp import serve

    def announce(addr):
        print(f"listening {addr}", flush=True)

    serve(args.bind, args.once, announce)


COMMANDS = {
    "encode": cmd_encode, "update": cmd_update, "txn": cmd_txn, "decode": cmd_decode, "verify": cmd_verify,
    "oracle-encode": cmd_oracle, "gen": cmd_gen, "stats": cmd_stats, "bench": cmd_bench, "worker": cmd_worker,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args) or 0
    except ConfigError as exc:
        print(f"tripress: {exc}", file=sys.stderr)
        return 1
    except TripressError as exc:
        print(f"tripress: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"tripress: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
