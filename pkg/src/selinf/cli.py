"""Command-line front end.

Subcommands::

    selinf infer     --data FILE --response NAME [--standardize] [--lambda auto|VALUE] ...
    selinf simulate  (--config FILE | --n N --p P --k K --amplitude A ...) --out-dir DIR
    selinf tnci      --a A --b B [--grid START:STOP:STEP | --x X,...] [--out-dir DIR]
    selinf replay    MANIFEST [--out-dir DIR]

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 null model.
Result files never contain timing, so rerunning with the same manifest
reproduces them byte for byte; timing goes to ``manifest.json`` only.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FailureBudgetError, NumericalError, ValidationError
from .lasso import DesignMatrix, PenaltySpec
from .pipeline import (
    MODEL,
    SIGN,
    data_split_baseline,
    estimate_sigma,
    infer,
    naive_intervals,
    select_lambda,
)
from .serialize import (
    dumps,
    file_sha256,
    intervals_to_csv,
    read_csv_table,
    result_to_dict,
    write_atomic,
)
from .simulation import (
    ExperimentConfig,
    rows_to_csv,
    run_coverage,
    run_width_comparison,
)
from .truncnorm import TruncationRegion, tn_interval_bounds

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_NULL_MODEL = 4


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with the validation code rather than argparse's default."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _lambda_arg(text):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="selinf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"selinf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("infer", help="selective intervals for a CSV data set")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--standardize", action="store_true",
                   help="center predictors and scale them to unit norm; center the response")
    p.add_argument("--lambda", dest="lam", type=_lambda_arg, default="auto")
    p.add_argument("--lambda-draws", type=int, default=10_000)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=None, help="noise sd; estimated if omitted")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--mode", choices=[SIGN, MODEL], default=SIGN)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--format", choices=["json", "csv", "both"], default="both")
    p.add_argument("--no-baselines", action="store_true",
                   help="skip the OLS and data-splitting comparison intervals")
    p.add_argument("--no-plot", action="store_true")

    s = sub.add_parser("simulate", help="Monte Carlo coverage or width experiment")
    s.add_argument("--config", help="JSON experiment file")
    s.add_argument("--experiment", choices=["coverage", "width"], default=None)
    s.add_argument("--n", type=int)
    s.add_argument("--p", type=int)
    s.add_argument("--k", type=int, default=0)
    s.add_argument("--amplitude", type=float, default=0.0)
    s.add_argument("--sigma", type=float, default=None)
    s.add_argument("--lambda", dest="lam", type=_lambda_arg, default=None)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--replications", type=int, default=None)
    s.add_argument("--mode", choices=[SIGN, MODEL], default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--no-plot", action="store_true")

    t = sub.add_parser("tnci", help="intervals for one truncated normal observation")
    t.add_argument("--a", type=float, required=True)
    t.add_argument("--b", type=float, required=True)
    t.add_argument("--sigma", type=float, default=1.0)
    t.add_argument("--alpha", type=float, default=0.1)
    g = t.add_mutually_exclusive_group()
    g.add_argument("--grid", default=None, help="START:STOP:STEP, inclusive of STOP")
    g.add_argument("--x", default=None, help="comma-separated observations")
    t.add_argument("--out-dir", default=None)
    t.add_argument("--no-plot", action="store_true")

    r = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out-dir", default=None)
    return parser


# ---------------------------------------------------------------- helpers

def _manifest(command, argv, **fields):
    return {"tool": "selinf", "version": __version__, "command": command, "argv": argv, **fields}


def _write_manifest(out_dir, manifest, started):
    timed = dict(manifest, timing={"elapsed_seconds": round(time.perf_counter() - started, 3)})
    write_atomic(Path(out_dir) / "manifest.json", dumps(timed))


def _fail(code, message):
    print(f"selinf: {message}", file=sys.stderr)
    return code


# ---------------------------------------------------------------- infer

def _infer_argv(args, data_path):
    argv = ["infer", "--data", str(data_path), "--response", args.response,
            "--lambda", str(args.lam), "--lambda-draws", str(args.lambda_draws),
            "--gamma", repr(args.gamma), "--alpha", repr(args.alpha), "--mode", args.mode,
            "--seed", str(args.seed), "--format", args.format]
    if args.standardize:
        argv.append("--standardize")
    if args.sigma is not None:
        argv += ["--sigma", repr(args.sigma)]
    if args.no_baselines:
        argv.append("--no-baselines")
    if args.no_plot:
        argv.append("--no-plot")
    return argv


def cmd_infer(args) -> int:
    started = time.perf_counter()
    out = Path(args.out_dir)
    data_path = Path(args.data).resolve()
    X_raw, y, names = read_csv_table(data_path, args.response)
    if args.standardize:
        X = DesignMatrix.standardize(X_raw, names)
        y = y - y.mean()
    else:
        X = DesignMatrix(X_raw, names)

    if args.sigma is not None:
        if not (args.sigma > 0 and math.isfinite(args.sigma)):
            raise ValidationError("--sigma must be positive and finite")
        sigma2, sigma_source = args.sigma**2, "user"
    else:
        sigma2, sigma_source = estimate_sigma(X, y), "estimated"
    if args.lam == "auto":
        lam = select_lambda(X, sigma2, n_draws=args.lambda_draws, seed=args.seed)
    else:
        lam = float(args.lam)
    penalty = PenaltySpec(lam, args.gamma)

    manifest = _manifest(
        "infer", _infer_argv(args, data_path),
        inputs={"data": str(data_path), "sha256": file_sha256(data_path),
                "response": args.response, "predictors": list(names),
                "standardize": args.standardize},
        penalty={"lambda_rule": args.lam, "lambda": lam, "gamma": args.gamma,
                 "lambda_draws": args.lambda_draws},
        sigma={"source": sigma_source, "sigma2": sigma2},
        alpha=args.alpha, mode=args.mode, seed=args.seed,
    )
    result = infer(X, y, penalty, sigma2, alpha=args.alpha, mode=args.mode)

    baselines = {}
    if not result.null_model and not args.no_baselines:
        baselines["ols"] = naive_intervals(X, y, result.model, sigma2, args.alpha)

        def rule(X1, s2):
            if args.lam == "auto":
                return PenaltySpec(select_lambda(X1, s2, args.lambda_draws, args.seed), args.gamma)
            return penalty

        baselines["split"], _ = data_split_baseline(X, y, rule, sigma2, args.alpha, args.seed)

    if args.format in ("json", "both"):
        write_atomic(out / "intervals.json", dumps(result_to_dict(result, manifest, baselines)))
    if args.format in ("csv", "both"):
        write_atomic(out / "intervals.csv", intervals_to_csv(result.intervals))
    if not result.null_model and not args.no_plot:
        from .plotting import plot_intervals

        groups = {args.mode: result.intervals, **baselines}
        plot_intervals(groups, out / "intervals.png",
                       title=f"{1 - args.alpha:.0%} intervals, lambda = {lam:.4g}")
    _write_manifest(out, manifest, started)

    if result.null_model:
        return _fail(EXIT_NULL_MODEL, f"lasso selected no variables at lambda = {lam:.6g}")
    for iv in result.intervals:
        print(f"{iv.name:>12s}  est {iv.estimate: .6g}  [{iv.lower: .6g}, {iv.upper: .6g}]"
              f"  p = {iv.pivot_at_zero:.4g}")
    failed = [iv for iv in result.intervals if not iv.ok]
    if failed:
        return _fail(EXIT_NUMERICAL, "; ".join(f"{iv.name}: {iv.error}" for iv in failed))
    return EXIT_OK


# ---------------------------------------------------------------- simulate

FLAG_FIELDS = {"sigma": "sigma", "lam": "lambda_rule", "alpha": "alpha",
               "replications": "replications", "mode": "mode", "seed": "seed"}


def _load_experiment(args):
    """Return ``(experiment, {regime: ExperimentConfig})`` from a file and/or flags."""
    overrides = {FLAG_FIELDS[k]: getattr(args, k) for k in FLAG_FIELDS
                 if getattr(args, k) is not None}
    if args.config:
        try:
            spec = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.config}: invalid JSON ({exc})") from None
        experiment = args.experiment or spec.pop("experiment", "coverage")
        spec.pop("experiment", None)
        spec.pop("description", None)
        shared = spec.pop("defaults", {})
        regimes = spec.pop("regimes", None) or {"main": spec}
        configs = {}
        for name, fields in regimes.items():
            try:
                configs[name] = ExperimentConfig.from_dict({**shared, **fields, **overrides})
            except TypeError as exc:
                raise ValidationError(f"regime {name!r}: {exc}") from None
        return experiment, configs
    if args.n is None or args.p is None:
        raise ValidationError("simulate needs --config or both --n and --p")
    fields = {"n": args.n, "p": args.p, "k": args.k, "amplitude": args.amplitude, **overrides}
    return args.experiment or "coverage", {"main": ExperimentConfig.from_dict(fields)}


def _prefix(name, many):
    return f"{name}_" if many else ""


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    out = Path(args.out_dir)
    experiment, configs = _load_experiment(args)
    many = len(configs) > 1
    # replay rebuilds the run from the stored configs, so no argv is kept
    manifest = _manifest(
        "simulate", None, experiment=experiment,
        configs={k: c.to_dict() for k, c in configs.items()},
    )
    report = {"manifest": manifest, "valid": True, "regimes": {}}
    table = []
    code = EXIT_OK
    for name, config in configs.items():
        pre = _prefix(name, many)
        try:
            if experiment == "coverage":
                rep = run_coverage(config)
                entry = rep.to_dict()
                write_atomic(out / f"{pre}replications.csv", rep.rows_csv())
                if not args.no_plot:
                    from .plotting import plot_pivot_ecdf

                    plot_pivot_ecdf([x["pivot_truth"] for x in rep.rows], out / f"{pre}pivots.png",
                                    title=f"{name}: pivots at the true target")
                table.append({"regime": name, **{k: v for k, v in rep.overall.items()
                                                 if not k.startswith("_")}})
            elif experiment == "width":
                cmp = run_width_comparison(config)
                entry = {"config": config.to_dict(), "valid": True, "summary": cmp.summary}
                write_atomic(out / f"{pre}replications.csv", cmp.rows_csv())
                write_atomic(out / f"{pre}split.csv", cmp.split_csv())
                if not args.no_plot and cmp.rows:
                    from .plotting import plot_ci_comparison

                    first = min(x["replication"] for x in cmp.rows)
                    plot_ci_comparison([x for x in cmp.rows if x["replication"] == first],
                                       out / f"{pre}ci_comparison.png", title=name)
                table.append(_width_row(name, cmp.summary))
            else:
                raise ValidationError(f"unknown experiment {experiment!r}")
        except FailureBudgetError as exc:
            partial = exc.report.to_dict() if exc.report is not None else {}
            partial.update(valid=False, error=str(exc))
            report["regimes"][name] = partial
            report["valid"] = False
            code = EXIT_NUMERICAL
            print(f"selinf: regime {name}: {exc}", file=sys.stderr)
            continue
        report["regimes"][name] = entry
    write_atomic(out / "report.json", dumps(report))
    if table:
        write_atomic(out / "summary.csv", rows_to_csv(table, list(table[0])))
        for row in table:
            print(", ".join(f"{k}={_short(v)}" for k, v in row.items()))
    _write_manifest(out, manifest, started)
    return code


def _short(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def _width_row(name, summary):
    row = {"regime": name, "lambda": summary["lambda"], "replications": summary["replications"]}
    for mode in (SIGN, MODEL):
        if mode in summary:
            s = summary[mode]
            row[f"{mode}_coverage"] = s["coverage"]
            row[f"{mode}_median_width_ratio"] = s["median_width_ratio"]
            row[f"{mode}_median_width_ratio_far"] = s["median_width_ratio_far_from_boundary"]
            row["naive_coverage"] = s["naive_coverage"]
    if "split" in summary:
        row["split_width_ratio"] = summary["split"]["width_ratio"]
        row["split_coverage"] = summary["split"]["coverage"]
    return row


# ---------------------------------------------------------------- tnci

def _grid(args):
    if args.x is not None:
        try:
            return [float(v) for v in args.x.split(",") if v.strip()]
        except ValueError:
            raise ValidationError(f"--x must be comma-separated numbers, got {args.x!r}") from None
    if args.grid is None:
        # interior points only: at an endpoint the pivot is constant in mu
        step = (args.b - args.a) / 100
        return [args.a + i * step for i in range(1, 100)]
    spec = args.grid
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ValidationError(f"--grid must be START:STOP:STEP, got {spec!r}") from None
    if not step > 0 or stop < start:
        raise ValidationError("--grid needs STEP > 0 and STOP >= START")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def tnci_table(a, b, xs, sigma=1.0, alpha=0.1):
    """Rows ``(x, L(x), U(x))`` for one observation of ``N(mu, sigma^2)`` truncated to ``[a, b]``.

    At ``x = a`` or ``x = b`` the pivot does not depend on ``mu``, so the
    bounds there come back infinite.
    """
    if not a < b:
        raise ValidationError(f"truncation bounds need a < b, got a = {a}, b = {b}")
    region = TruncationRegion.interval(a, b)
    rows = []
    for x in xs:
        if not a <= x <= b:
            raise ValidationError(f"x = {x} lies outside [{a}, {b}]")
        lo, hi = tn_interval_bounds(x, sigma**2, region, alpha, unbracketed="infinite")
        rows.append((x, lo, hi))
    return rows


def cmd_tnci(args) -> int:
    if not args.a < args.b:
        raise ValidationError(f"truncation bounds need a < b, got a = {args.a}, b = {args.b}")
    xs = _grid(args)
    rows = tnci_table(args.a, args.b, xs, args.sigma, args.alpha)
    text = "x,lower,upper\n" + "".join(f"{x!r},{lo!r},{hi!r}\n" for x, lo, hi in rows)
    if args.out_dir is None:
        sys.stdout.write(text)
        return EXIT_OK
    out = Path(args.out_dir)
    write_atomic(out / "tnci.csv", text)
    if not args.no_plot:
        from .plotting import plot_tnci

        arr = np.array(rows)
        plot_tnci(arr[:, 0], arr[:, 1], arr[:, 2], args.a, args.b, out / "tnci.png", args.alpha,
                  args.sigma)
    return EXIT_OK


# ---------------------------------------------------------------- replay

def cmd_replay(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from None
    out_dir = args.out_dir or str(path.parent)
    command = manifest.get("command")
    if command == "infer":
        recorded = manifest["inputs"]["sha256"]
        if file_sha256(manifest["inputs"]["data"]) != recorded:
            raise ValidationError("data file changed since the manifest was written")
        return main(manifest["argv"] + ["--out-dir", out_dir])
    if command == "simulate":
        spec = {"experiment": manifest["experiment"], "regimes": manifest["configs"]}
        cfg = Path(out_dir) / ".replay_config.json"
        write_atomic(cfg, json.dumps(spec))
        try:
            return main(["simulate", "--config", str(cfg), "--out-dir", out_dir])
        finally:
            cfg.unlink(missing_ok=True)
    raise ValidationError(f"manifest command {command!r} cannot be replayed")


COMMANDS = {"infer": cmd_infer, "simulate": cmd_simulate, "tnci": cmd_tnci, "replay": cmd_replay}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
