"""Command-line entry point: ``iscrc {compress,classify,bench,synth}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 solver error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import METHODS, classify_with, run_benchmark
from .compression import DictLearnConfig, compress_gallery
from .core import CompressedGalleryCollection, ImageSet, KernelSpec, SolverConfig
from .data import load_dataset, load_gallery, read_set_csv, save_gallery, write_synthetic
from .errors import ConfigError, DataError, SolverError
from .synthetic import SyntheticSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="iscrc", description="Image-set classification by collaborative hull representation.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compress", help="learn per-class dictionaries and save a gallery file")
    c.add_argument("--manifest", required=True, type=Path)
    c.add_argument("--atoms", required=True, type=_positive_int)
    c.add_argument("--out", required=True, type=Path)
    c.add_argument("--code-lambda", type=float, default=0.001)
    c.add_argument("--max-iters", type=_positive_int, default=30)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--frames", type=_positive_int, help="use only the first N frames of each set")
    c.add_argument("--raw", action="store_true", help="store the normalized frames themselves, no learning")

    q = sub.add_parser("classify", help="classify one query set against a gallery file")
    q.add_argument("--gallery", required=True, type=Path)
    q.add_argument("--query", required=True, type=Path)
    q.add_argument("--method", required=True, choices=METHODS)
    q.add_argument("--frames", type=_positive_int)
    q.add_argument("--kernel", choices=("linear", "gaussian"), default="gaussian")
    q.add_argument("--delta", type=float, default=5.0)
    q.add_argument("--tau", type=float, default=1.0)
    q.add_argument("--lambda1", type=float, default=0.001)
    q.add_argument("--lambda2", type=float, default=0.001)
    q.add_argument("--no-normalize", action="store_true", help="do not unit-normalize query frames")

    b = sub.add_parser("bench", help="run the benchmark described by a JSON config")
    b.add_argument("--config", required=True, type=Path)
    b.add_argument("--jobs", type=_positive_int, default=1)
    b.add_argument("--out", type=Path, help="report JSON; timings go to <out>.timing.json")

    s = sub.add_parser("synth", help="write a synthetic dataset (CSVs plus manifest)")
    s.add_argument("--spec", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    return p


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read: {exc.strerror}", path=path) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None


def cmd_compress(args) -> int:
    galleries, _ = load_dataset(args.manifest, frames=args.frames, normalize=True)
    if not galleries:
        raise DataError("manifest has no gallery sets", path=args.manifest)
    if args.raw:
        D = CompressedGalleryCollection.from_sets(galleries)
    else:
        cfg = DictLearnConfig(atoms=args.atoms, code_lambda=args.code_lambda, max_iters=args.max_iters,
                              seed=args.seed)
        D = compress_gallery(galleries, cfg)
    meta = {"manifest": str(args.manifest), "atoms": args.atoms, "raw": args.raw,
            "code_lambda": args.code_lambda, "seed": args.seed}
    save_gallery(D, args.out, normalized=True, meta=meta)
    print(json.dumps({"gallery": str(args.out), "classes": len(D.labels), "atoms": D.atom_counts()}))
    return EXIT_OK


def cmd_classify(args) -> int:
    D, doc = load_gallery(args.gallery)
    features = read_set_csv(args.query).first(args.frames)
    if features.rows != D.dimension:
        raise DataError(f"query has {features.rows} rows, gallery dimension is {D.dimension}", path=args.query)
    if not args.no_normalize:
        try:
            features = features.normalized()
        except DataError as exc:
            raise DataError(str(exc), path=args.query) from None
    cfg = SolverConfig(lambda1=args.lambda1, lambda2=args.lambda2, tau=args.tau,
                       kernel=KernelSpec(args.kernel, args.delta))
    res = classify_with(args.method, ImageSet(None, features, str(args.query)), D, cfg)
    out = {
        "method": args.method,
        "predicted": res.predicted,
        "residuals": res.residuals,
        "frames": features.cols,
        "converged": res.solution.converged,
        "elapsed": res.elapsed,
    }
    print(json.dumps(out, indent=1))
    return EXIT_OK


def cmd_bench(args) -> int:
    report = run_benchmark(args.config, jobs=args.jobs)
    if args.out:
        args.out.write_text(report.to_json() + "\n")
        Path(str(args.out) + ".timing.json").write_text(report.timing_json() + "\n")
    print(report.format_table())
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SyntheticSpec.from_dict(_read_json(args.spec))
    path = write_synthetic(spec, args.out)
    print(json.dumps({"manifest": str(path)}))
    return EXIT_OK


COMMANDS = {"compress": cmd_compress, "classify": cmd_classify, "bench": cmd_bench, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"iscrc: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"iscrc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"iscrc: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
