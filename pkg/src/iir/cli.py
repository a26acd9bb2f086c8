"""Command-line interface: a thin client over the service handlers.

By default commands run in-process through the same functions the HTTP
endpoints call; with --server URL the request is POSTed to a running service
instead. Exit codes: 0 success, 1 runtime failure, 2 usage error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import sys

from .io import ParseError, ResultEnvelope, atomic_write, curve_csv, envelope_json
from .model import ContractViolation
from .service import ops, schemas

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_VERIFY = 3


def _add_global_flags(p: argparse.ArgumentParser, suppress: bool = False):
    """Flags accepted both before and after the subcommand. The subparser
    copies default to SUPPRESS so they only override the top-level values
    when actually given."""
    s = argparse.SUPPRESS

    def d(v):
        return s if suppress else v

    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--gamma", default=d("auto"), help='step size, or "auto" = 1/kappa')
    p.add_argument("--kernel", default=d(None), help="linear | gaussian:s | poly:p:c | trig:d")
    p.add_argument("--rule", default=d(None),
                   help="fixed:T | norm:r | risk:r | nonattainable | holdout[:frac[:T]]")
    p.add_argument("--out", default=d(None), help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=d(None))
    p.add_argument("--server", default=d(None),
                   help="POST to a running service instead of running in-process")


def _add_source_args(p: argparse.ArgumentParser, default_preset: str = "trig-d5"):
    p.add_argument("--preset", default=default_preset, help="synthetic problem preset")
    p.add_argument("--data", dest="data_path", help="dataset file (overrides preset)")
    p.add_argument("--data-format", choices=("csv", "libsvm"), default="csv")
    p.add_argument("--target-column", type=int, default=-1)
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--task", choices=("regression", "classification"), default="regression")
    p.add_argument("--n", type=int, default=200, help="sample size for presets")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iir",
        description="Incremental iterative regularization for least squares.",
    )
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train with a stopping rule, emit coefficients and errors")
    _add_global_flags(p, suppress=True)
    _add_source_args(p)

    p = sub.add_parser("curve", help="per-epoch train/validation/test error curve")
    _add_global_flags(p, suppress=True)
    _add_source_args(p)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--validation-fraction", type=float, default=0.2)
    p.add_argument("--test-n", type=int, default=1000)

    p = sub.add_parser("rates", help="Monte Carlo estimate of the error decay rate")
    _add_global_flags(p, suppress=True)
    p.add_argument("--preset", default="source:r=1.5")
    p.add_argument("--grid", default="64,128,256,512,1024,2048,4096,8192")
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--mode", choices=("norm", "risk"), default="norm")

    p = sub.add_parser("verify", help="bound, identity and concentration checks")
    _add_global_flags(p, suppress=True)
    p.add_argument("--preset", default="source:r=1.5")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--algebra-trials", type=int, default=100)
    p.add_argument("--concentration-n", type=int, default=200)
    p.add_argument("--concentration-delta", type=float, default=0.1)
    p.add_argument("--concentration-trials", type=int, default=500)

    p = sub.add_parser("bench", help="KIIR / KIR / KRR baseline comparison")
    _add_global_flags(p, suppress=True)
    _add_source_args(p)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--max-epochs", type=int, default=100)

    p = sub.add_parser("synth", help="emit a generated dataset as CSV")
    _add_global_flags(p, suppress=True)
    p.add_argument("--preset", default="trig-d5")
    p.add_argument("--n", type=int, default=100)

    return parser


def _build_request(args) -> tuple[str, object]:
    if args.command == "fit":
        return "fit", schemas.FitRequest(
            preset=args.preset,
            data_path=args.data_path,
            data_format=args.data_format,
            target_column=args.target_column,
            has_header=args.has_header,
            task=args.task,
            n=args.n,
            kernel=args.kernel,
            gamma=_gamma(args),
            rule=args.rule or "holdout",
            seed=args.seed,
        )
    if args.command == "curve":
        return "curve", schemas.CurveRequest(
            preset=args.preset,
            data_path=args.data_path,
            data_format=args.data_format,
            target_column=args.target_column,
            has_header=args.has_header,
            task=args.task,
            n=args.n,
            kernel=args.kernel,
            gamma=_gamma(args),
            epochs=args.epochs,
            validation_fraction=args.validation_fraction,
            test_n=args.test_n,
            seed=args.seed,
        )
    if args.command == "rates":
        return "rates", schemas.RatesRequest(
            preset=args.preset,
            rule=args.rule or "norm:1.5",
            grid=[int(v) for v in args.grid.split(",") if v],
            replicates=args.replicates,
            mode=args.mode,
            gamma=_gamma(args),
            seed=args.seed,
        )
    if args.command == "verify":
        return "verify", schemas.VerifyRequest(
            preset=args.preset,
            epochs=args.epochs,
            algebra_trials=args.algebra_trials,
            concentration_n=args.concentration_n,
            concentration_delta=args.concentration_delta,
            concentration_trials=args.concentration_trials,
            gamma=_gamma(args),
            seed=args.seed,
        )
    if args.command == "bench":
        return "bench", schemas.BenchRequest(
            preset=args.preset,
            data_path=args.data_path,
            data_format=args.data_format,
            target_column=args.target_column,
            has_header=args.has_header,
            task=args.task,
            n=args.n,
            kernel=args.kernel or "linear",
            seeds=[int(v) for v in args.seeds.split(",") if v],
            max_epochs=args.max_epochs,
            gamma=_gamma(args),
            seed=args.seed,
        )
    return "synth", schemas.SynthRequest(preset=args.preset, n=args.n, seed=args.seed)


def _gamma(args):
    if args.gamma == "auto":
        return "auto"
    return float(args.gamma)


_HANDLERS = {
    "fit": ops.run_fit,
    "curve": ops.run_curve,
    "rates": ops.run_rates,
    "verify": ops.run_verify,
    "bench": ops.run_bench,
    "synth": ops.run_synth,
}


def _dispatch(command: str, request, server: str | None) -> ResultEnvelope:
    if server is None:
        return _HANDLERS[command](request)
    import httpx  # only needed in client mode

    resp = httpx.post(
        f"{server.rstrip('/')}/{command}", json=request.model_dump(), timeout=None
    )
    resp.raise_for_status()
    return ResultEnvelope.from_dict(resp.json())


def _bench_csv(env: ResultEnvelope) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "metric", "KIIR", "KRR", "KIR"])
    med = env.metrics["median"]
    writer.writerow(
        [
            env.metrics.get("source", "dataset"),
            env.metrics["metric"],
            med["KIIR"],
            med["KRR"],
            med["KIR"],
        ]
    )
    return buf.getvalue()


def _render(command: str, env: ResultEnvelope, fmt: str | None) -> str:
    default_fmt = {"fit": "json", "curve": "csv", "rates": "json", "verify": "json",
                   "bench": "csv", "synth": "csv"}[command]
    fmt = fmt or default_fmt
    if fmt == "json":
        return envelope_json(env)
    if command == "curve":
        return curve_csv(env.metrics["rows"])
    if command == "synth":
        return env.metrics["csv"]
    if command == "bench":
        return _bench_csv(env)
    raise ContractViolation(f"{command} has no CSV rendering; use --format json")


def _emit(text: str, out: str | None):
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        command, request = _build_request(args)
        env = _dispatch(command, request, args.server)
        _emit(_render(command, env, args.format), args.out)
    except (ContractViolation, ParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if command == "verify" and not env.metrics.get("pass", False):
        print("verification FAILED", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
