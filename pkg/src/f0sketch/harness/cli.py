"""Command-line front end.

    f0sketch init --n N --eps E --delta D [--entropy-seed S] --output seed.bin
    f0sketch sketch --seed seed.bin --input elems.txt [--format u64] --output a.sk
    f0sketch merge a.sk b.sk ... --output all.sk
    f0sketch estimate all.sk
    f0sketch experiment --trials 400 --topology balanced --output runs.csv
    f0sketch bench
    f0sketch verify

Exit status is 0 on success, 1 when a check fails and 2 on bad input.
"""
from __future__ import annotations

import argparse
import random
import sys
import time
from pathlib import Path

import numpy as np

from .. import api, codec
from ..params import DEFAULT_C6_PRACTICAL, PRACTICAL, PROFILES, ParameterError
from ..sketch import SketchMismatch
from . import experiments, verify


class CliError(Exception):
    """Bad input; reported on stderr with exit status 2."""


def _entropy(seed: int | None):
    return random.Random(seed) if seed is not None else random.SystemRandom()


def _read_bytes(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc


def _write_bytes(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
        return
    Path(path).write_bytes(data)


def parse_elements(data: bytes, fmt: str, n: int) -> np.ndarray:
    """Decimal one-per-line text or packed little-endian u64 words."""
    if fmt == "u64":
        if len(data) % 8:
            raise CliError("binary input length is not a multiple of 8 bytes")
        xs = np.frombuffer(data, dtype="<u8").astype(np.uint64)
    else:
        try:
            values = [int(tok) for tok in data.split()]
        except ValueError as exc:
            raise CliError(f"malformed element: {exc}") from exc
        if any(v < 0 for v in values):
            raise CliError("elements must be non-negative")
        if any(v >= n for v in values):
            raise CliError(f"element outside the universe [0, {n})")
        return np.array(values, dtype=np.uint64)
    if xs.size and int(xs.max()) >= n:
        raise CliError(f"element outside the universe [0, {n})")
    return xs


def _load_sketch(path: str) -> codec.SketchFile:
    try:
        return codec.decode_sketch_file(_read_bytes(path))
    except codec.CodecError as exc:
        raise CliError(f"{path}: {exc}") from exc


def cmd_init(args) -> int:
    seed = api.make_seed(
        args.n, args.eps, args.delta, _entropy(args.entropy_seed),
        profile=args.profile, c6_practical=args.c6, layer=args.layer,
    )
    _write_bytes(args.output, codec.encode_seed(seed))
    return 0


def cmd_sketch(args) -> int:
    try:
        seed = codec.decode_seed(_read_bytes(args.seed))
    except codec.CodecError as exc:
        raise CliError(f"{args.seed}: {exc}") from exc
    n = seed.params.inner.n if hasattr(seed.params, "inner") else seed.params.n
    xs = parse_elements(_read_bytes(args.input), args.format, n)
    s = api.sketch_elements(xs, seed) if xs.size else api.empty(seed)
    _write_bytes(args.output, codec.encode_sketch_file(s, codec.fingerprint(seed)))
    return 0


def cmd_merge(args) -> int:
    if len(args.files) < 2:
        raise CliError("merge needs at least two sketch files")
    files = [_load_sketch(p) for p in args.files]
    first = files[0]
    acc = first.sketch
    for path, f in zip(args.files[1:], files[1:]):
        if f.fingerprint != first.fingerprint or f.params != first.params:
            raise CliError(f"{path} was built from a different seed than {args.files[0]}")
        acc = api.merge(acc, f.sketch)
    _write_bytes(args.output, codec.encode_sketch_file(acc, first.fingerprint))
    return 0


def cmd_estimate(args) -> int:
    f = _load_sketch(args.file)
    print(repr(api.estimate(f.sketch)))
    return 0


def _cardinalities(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(float(t)) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad cardinality list {text!r}") from exc


def cmd_experiment(args) -> int:
    cfg = experiments.ExperimentConfig(
        n=args.n, eps=args.eps, delta=args.delta, profile=args.profile,
        cardinalities=args.cardinalities, trials=args.trials, topology=args.topology,
        workers=args.workers, duplication=args.duplication, entropy_seed=args.entropy_seed or 0,
        layer=args.layer, c6_practical=args.c6, output=None,
    )
    result = experiments.run_accuracy_experiment(
        cfg, progress=lambda msg: print(msg, file=sys.stderr)
    )
    text = result.to_csv()
    if args.output and args.output != "-":
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    seed = api.make_seed(
        args.n, args.eps, args.delta, _entropy(args.entropy_seed),
        profile=args.profile, c6_practical=args.c6, layer=args.layer,
    )
    rng = np.random.default_rng(args.entropy_seed or 0)
    xs = experiments.distinct_elements(args.n, min(args.size, args.n), rng)
    t0 = time.perf_counter()
    s = api.sketch_elements(xs, seed)
    t1 = time.perf_counter()
    for _ in range(args.repeat):
        api.merge(s, s)
    t2 = time.perf_counter()
    for _ in range(args.repeat):
        api.estimate(s)
    t3 = time.perf_counter()
    blob = codec.encode_sketch_file(s, codec.fingerprint(seed))
    t4 = time.perf_counter()
    codec.decode_sketch_file(blob)
    t5 = time.perf_counter()
    print(f"sketch {xs.size} elements: {t1 - t0:.3f} s ({xs.size / (t1 - t0):.0f} elements/s)")
    print(f"merge:    {1e3 * (t2 - t1) / args.repeat:.3f} ms")
    print(f"estimate: {1e3 * (t3 - t2) / args.repeat:.3f} ms")
    print(f"encode:   {1e3 * (t4 - t3):.3f} ms, {len(blob)} bytes")
    print(f"decode:   {1e3 * (t5 - t4):.3f} ms")
    return 0


def cmd_verify(args) -> int:
    ok = True
    for report in verify.run_all(quick=args.quick):
        print(("PASS " if report.ok else "FAIL ") + report.summary())
        for v in report.violations[:10]:
            print(f"    {v}")
        ok &= report.ok
    return 0 if ok else 1


def _add_params(p: argparse.ArgumentParser, *, eps: float = 0.1, delta: float = 0.05) -> None:
    p.add_argument("--n", type=int, default=1 << 32, help="universe size; elements are 0..n-1")
    p.add_argument("--eps", type=float, default=eps, help="relative accuracy")
    p.add_argument("--delta", type=float, default=delta, help="failure probability")
    p.add_argument("--profile", choices=PROFILES, default=PRACTICAL)
    p.add_argument("--c6", type=int, default=DEFAULT_C6_PRACTICAL,
                   help="bin constant of the practical profile")
    p.add_argument("--layer", choices=("auto", "inner", "outer"), default="auto",
                   help="auto adds the repetition layer when delta < 1/ln n")
    p.add_argument("--entropy-seed", type=int, default=None,
                   help="seed the coin flips for reproducible runs (default: OS entropy)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="f0sketch", description="Mergeable distinct-count sketches")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="draw a seed and write it to a file")
    _add_params(p)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("sketch", help="sketch a stream of elements")
    p.add_argument("--seed", required=True, help="seed file written by init")
    p.add_argument("--input", default="-", help="element file, - for stdin")
    p.add_argument("--format", choices=("text", "u64"), default="text")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("merge", help="merge two or more sketch files")
    p.add_argument("files", nargs="+")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("estimate", help="print the distinct-count estimate")
    p.add_argument("file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", help="accuracy experiment, CSV output")
    _add_params(p)
    p.set_defaults(n=1 << 20, layer="inner")
    p.add_argument("--cardinalities", type=_cardinalities, default=(10, 1000, 100_000))
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--topology", choices=experiments.TOPOLOGIES, default="sequential")
    p.add_argument("--workers", type=int, default=8)
    p.add_argument("--duplication", choices=experiments.DUPLICATION, default="disjoint")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bench", help="time the core operations")
    _add_params(p)
    p.set_defaults(n=1 << 20)
    p.add_argument("--size", type=int, default=100_000, help="distinct elements to sketch")
    p.add_argument("--repeat", type=int, default=20)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run the exhaustive reference checks")
    p.add_argument("--quick", action="store_true", help="skip the slower checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ParameterError, SketchMismatch, ValueError) as exc:
        print(f"f0sketch: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
