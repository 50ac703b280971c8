"""Monte Carlo checks of conditional coverage, FCR and pivot uniformity.

Each replication draws ``y ~ N(X beta, sigma^2 I)`` on a fixed design, runs
the selective pipeline and scores every reported interval against the
target of the model that was actually selected, ``X_M^+ X beta``.

Streams: the design comes from ``SeedSequence(seed, spawn_key=(2,))`` and
replication ``r`` uses ``spawn_key=(3, r)``, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np
from scipy import stats

from .errors import FailureBudgetError, SelectiveInferenceError, ValidationError
from .lasso import PenaltySpec
from .pipeline import (
    MODEL,
    SIGN,
    data_split_baseline,
    derive_rng,
    infer,
    naive_intervals,
    select_lambda,
    thread_count,
)
from .selection import MODEL_CAP
from .truncnorm import tn_cdf

STREAM_DESIGN = 2
STREAM_REPLICATION = 3

FAILURE_BUDGET = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    p: int
    true_beta: tuple[float, ...]
    sigma: float = 1.0
    lambda_rule: Union[float, str] = "auto"
    alpha: float = 0.1
    replications: int = 1000
    mode: str = SIGN
    seed: int = 0
    lambda_draws: int = 2000
    cap: int = MODEL_CAP

    def __post_init__(self):
        beta = tuple(float(b) for b in self.true_beta)
        object.__setattr__(self, "true_beta", beta)
        if self.n < 1 or self.p < 1:
            raise ValidationError("n and p must be positive")
        if len(beta) != self.p:
            raise ValidationError(f"true_beta has {len(beta)} entries, p = {self.p}")
        if self.replications < 1:
            raise ValidationError("replications must be at least 1")
        if self.mode not in (SIGN, MODEL):
            raise ValidationError(f"mode must be '{SIGN}' or '{MODEL}'")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        numeric = [self.sigma, self.alpha, *beta]
        if isinstance(self.lambda_rule, str):
            if self.lambda_rule != "auto":
                raise ValidationError("lambda_rule must be a number or 'auto'")
        else:
            numeric.append(self.lambda_rule)
            if not float(self.lambda_rule) > 0:
                raise ValidationError("fixed lambda must be positive")
        if not all(math.isfinite(float(v)) for v in numeric) or not self.sigma > 0:
            raise ValidationError("numeric settings must be finite and sigma positive")

    @classmethod
    def sparse(cls, n, p, k, amplitude, **kw):
        """``k`` leading coefficients equal to ``amplitude``, the rest zero."""
        beta = [amplitude] * k + [0.0] * (p - k)
        return cls(n=n, p=p, true_beta=tuple(beta), **kw)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "true_beta" not in d:
            k = int(d.pop("k", 0))
            amp = float(d.pop("amplitude", 0.0))
            d["true_beta"] = [amp] * k + [0.0] * (int(d["p"]) - k)
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["true_beta"] = list(self.true_beta)
        return d


def make_design(config: ExperimentConfig) -> np.ndarray:
    rng = derive_rng(config.seed, STREAM_DESIGN)
    return rng.standard_normal((config.n, config.p))


def resolve_lambda(config: ExperimentConfig, X) -> float:
    if config.lambda_rule == "auto":
        return select_lambda(X, config.sigma**2, n_draws=config.lambda_draws, seed=config.seed)
    return float(config.lambda_rule)


@dataclass
class Replication:
    index: int
    model: tuple[int, ...] = ()
    rows: list = field(default_factory=list)
    failure: str | None = None
    split_rows: list = field(default_factory=list)

    @property
    def model_size(self):
        return len(self.model)

    @property
    def n_errors(self):
        return sum(not r["covered"] for r in self.rows)


ROW_FIELDS = [
    "replication", "variable", "model_size", "mode", "estimate", "lower", "upper",
    "truth", "covered", "width", "naive_width", "naive_covered", "pivot_truth",
    "pivot_shifted", "boundary_distance", "sd",
]


def _score(rep_index, iv, truth, model_size, zq):
    sd = iv.sd
    x = min(max(iv.estimate, iv.region.lower), iv.region.upper)
    pivot = tn_cdf(x, truth, sd**2, iv.region)
    shifted = tn_cdf(x, truth + 5 * sd, sd**2, iv.region)
    naive_half = zq * sd
    return {
        "replication": rep_index,
        "variable": iv.target.coef_index,
        "model_size": model_size,
        "mode": iv.mode,
        "estimate": iv.estimate,
        "lower": iv.lower,
        "upper": iv.upper,
        "truth": truth,
        "covered": bool(iv.lower <= truth <= iv.upper),
        "width": iv.upper - iv.lower,
        "naive_width": 2 * naive_half,
        "naive_covered": bool(abs(iv.estimate - truth) <= naive_half),
        "pivot_truth": pivot,
        "pivot_shifted": shifted,
        "boundary_distance": iv.region.distance_to_boundary(iv.estimate) / sd,
        "sd": sd,
    }


def _replicate(config, X, mu, penalty, r, modes, with_split):
    rng = derive_rng(config.seed, STREAM_REPLICATION, r)
    y = mu + config.sigma * rng.standard_normal(config.n)
    split_seed = int(rng.integers(2**63))
    rep = Replication(r)
    zq = stats.norm.ppf(1 - config.alpha / 2)
    try:
        for mode in modes:
            res = infer(X, y, penalty, config.sigma**2, config.alpha, mode, config.cap,
                        threads=1, unbracketed="infinite")
            rep.model = res.model
            if res.null_model:
                break
            if mode == MODEL and len(res.model) > config.cap:
                continue
            for iv in res.intervals:
                if not iv.ok:
                    raise SelectiveInferenceError(iv.error)
                truth = float(iv.target.eta @ mu)
                rep.rows.append(_score(r, iv, truth, len(res.model), zq))
        if with_split:
            split, (first, second) = data_split_baseline(
                X, y, penalty, config.sigma**2, config.alpha, seed=split_seed
            )
            if split:
                M1 = split[0].target.model
                full = naive_intervals(X, y, M1, config.sigma**2, config.alpha)
                for s_iv, f_iv in zip(split, full):
                    truth = float(s_iv.target.eta @ mu[second])
                    rep.split_rows.append({
                        "replication": r,
                        "variable": s_iv.target.coef_index,
                        "split_width": s_iv.width,
                        "full_ols_width": f_iv.width,
                        "split_covered": bool(s_iv.covers(truth)),
                    })
    except SelectiveInferenceError as exc:
        rep.rows = []
        rep.split_rows = []
        rep.failure = f"{type(exc).__name__}: {exc}"
    return rep


def _run(config, modes, with_split=False, threads=None):
    X = make_design(config)
    mu = X @ np.asarray(config.true_beta)
    penalty = PenaltySpec(resolve_lambda(config, X))

    def task(r):
        return _replicate(config, X, mu, penalty, r, modes, with_split)

    nthreads = thread_count(threads)
    reps_idx = range(config.replications)
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            reps = list(pool.map(task, reps_idx))
    else:
        reps = [task(r) for r in reps_idx]
    return reps, penalty.lam


def _ks(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {"statistic": math.nan, "p_value": math.nan, "count": 0}
    res = stats.kstest(values, "uniform")
    return {"statistic": float(res.statistic), "p_value": float(res.pvalue), "count": int(values.size)}


def _summary(reps, rows, mode):
    """Coverage, FCR and pFCR over the successful replications."""
    good = [r for r in reps if r.failure is None]
    R = len(good)
    selected = [r for r in good if r.model_size > 0]
    props = [Fraction(sum(not x["covered"] for x in r.rows if x["mode"] == mode),
                      max(1, sum(x["mode"] == mode for x in r.rows)))
             for r in selected]
    fcr_exact = sum(props, Fraction(0)) / R if R else Fraction(0)
    pfcr_exact = sum(props, Fraction(0)) / len(selected) if selected else Fraction(0)
    rows = [x for x in rows if x["mode"] == mode]
    covered = np.array([x["covered"] for x in rows], dtype=float)
    widths = np.array([x["width"] for x in rows], dtype=float)
    naive = np.array([x["naive_covered"] for x in rows], dtype=float)
    cov = float(covered.mean()) if covered.size else math.nan
    return {
        "replications": R,
        "intervals": int(covered.size),
        "coverage": cov,
        "coverage_se": math.sqrt(cov * (1 - cov) / covered.size) if covered.size else math.nan,
        "naive_coverage": float(naive.mean()) if naive.size else math.nan,
        "fcr": float(fcr_exact),
        "pfcr": float(pfcr_exact),
        "fcr_se": float(np.std([float(p) for p in props] + [0.0] * (R - len(selected)), ddof=1) / math.sqrt(R)) if R > 1 else math.nan,
        "selection_probability": len(selected) / R if R else math.nan,
        "null_model_frequency": 1 - len(selected) / R if R else math.nan,
        "unbounded_intervals": int(np.sum(~np.isfinite(widths))),
        "mean_width": float(widths[np.isfinite(widths)].mean()) if np.isfinite(widths).any() else math.nan,
        "median_width": float(np.median(widths)) if widths.size else math.nan,
        "_fcr_exact": fcr_exact,
        "_pfcr_exact": pfcr_exact,
    }


@dataclass
class CoverageReport:
    config: ExperimentConfig
    lam: float
    overall: dict
    by_model_size: dict
    pivot_ks: dict
    failures: int
    failure_messages: list
    rows: list = field(repr=False, default_factory=list)
    valid: bool = True

    @property
    def coverage(self):
        return self.overall["coverage"]

    @property
    def fcr(self):
        return self.overall["fcr"]

    @property
    def pfcr(self):
        return self.overall["pfcr"]

    def to_dict(self):
        def clean(d):
            return {k: v for k, v in d.items() if not k.startswith("_")}
        return {
            "config": self.config.to_dict(),
            "lambda": self.lam,
            "valid": self.valid,
            "failures": self.failures,
            "failure_messages": self.failure_messages[:20],
            "overall": clean(self.overall),
            "by_model_size": {str(k): clean(v) for k, v in sorted(self.by_model_size.items())},
            "pivot_ks": self.pivot_ks,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def rows_csv(self):
        return rows_to_csv(self.rows, ROW_FIELDS)


def rows_to_csv(rows, fields):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _check_budget(reps, report):
    failures = sum(r.failure is not None for r in reps)
    if failures > FAILURE_BUDGET * len(reps):
        report.valid = False
        raise FailureBudgetError(
            f"{failures} of {len(reps)} replications failed (budget {FAILURE_BUDGET:.0%})",
            report=report,
        )


def _pick_one(reps, rows, config):
    """One pivot per replication, chosen at random, giving an i.i.d. sample."""
    by_rep = {}
    for x in rows:
        by_rep.setdefault(x["replication"], []).append(x)
    picked = []
    for r, xs in sorted(by_rep.items()):
        rng = derive_rng(config.seed, STREAM_REPLICATION, r, 1)
        picked.append(xs[int(rng.integers(len(xs)))])
    return picked


def _pivot_report(reps, rows, config):
    picked = _pick_one(reps, rows, config)
    per_var = {}
    for x in rows:
        per_var.setdefault(x["variable"], []).append(x["pivot_truth"])
    return {
        "one_per_replication": _ks([x["pivot_truth"] for x in picked]),
        "pooled": _ks([x["pivot_truth"] for x in rows]),
        "per_variable": {str(j): _ks(v) for j, v in sorted(per_var.items())},
        "shifted_one_per_replication": _ks([x["pivot_shifted"] for x in picked]),
    }


def _build_report(config, reps, lam, mode):
    rows = [x for r in reps if r.failure is None for x in r.rows if x["mode"] == mode]
    overall = _summary(reps, rows, mode)
    sizes = sorted({r.model_size for r in reps if r.failure is None})
    by_size = {}
    for k in sizes:
        sub = [r for r in reps if r.failure is None and r.model_size == k]
        by_size[k] = _summary(sub, [x for x in rows if x["model_size"] == k], mode)
    report = CoverageReport(
        config=config,
        lam=lam,
        overall=overall,
        by_model_size=by_size,
        pivot_ks=_pivot_report(reps, rows, config),
        failures=sum(r.failure is not None for r in reps),
        failure_messages=[r.failure for r in reps if r.failure],
        rows=rows,
    )
    _check_budget(reps, report)
    return report


def run_coverage(config: ExperimentConfig, threads=None) -> CoverageReport:
    reps, lam = _run(config, [config.mode], threads=threads)
    return _build_report(config, reps, lam, config.mode)


def run_pivot_uniformity(config: ExperimentConfig, threads=None) -> dict:
    """KS tests of the pivot at the true target, pooled, per variable and one per replication."""
    report = run_coverage(config, threads)
    return report.pivot_ks


@dataclass
class WidthComparison:
    rows: list
    split_rows: list
    summary: dict

    def rows_csv(self):
        return rows_to_csv(self.rows, ROW_FIELDS)

    def split_csv(self):
        return rows_to_csv(
            self.split_rows,
            ["replication", "variable", "split_width", "full_ols_width", "split_covered"],
        )


def run_width_comparison(config: ExperimentConfig, threads=None, modes=(SIGN, MODEL)) -> WidthComparison:
    """Adjusted, naive and data-splitting interval widths, replication by replication."""
    reps, lam = _run(config, list(modes), with_split=True, threads=threads)
    failures = sum(r.failure is not None for r in reps)
    if failures > FAILURE_BUDGET * len(reps):
        raise FailureBudgetError(f"{failures} of {len(reps)} replications failed")
    good = [r for r in reps if r.failure is None]
    rows = [x for r in good for x in r.rows]
    split = [x for r in good for x in r.split_rows]
    summary = {"lambda": lam, "failures": failures, "replications": len(good)}
    for mode in modes:
        mrows = [x for x in rows if x["mode"] == mode]
        if not mrows:
            continue
        ratio = np.array([x["width"] / x["naive_width"] for x in mrows])
        far = np.array([x["boundary_distance"] >= 0.5 for x in mrows])
        summary[mode] = {
            "intervals": len(mrows),
            "coverage": float(np.mean([x["covered"] for x in mrows])),
            "naive_coverage": float(np.mean([x["naive_covered"] for x in mrows])),
            "median_width_ratio": float(np.median(ratio)),
            "median_width_ratio_far_from_boundary": float(np.median(ratio[far])) if far.any() else math.nan,
            "far_fraction": float(far.mean()),
        }
    if split:
        sw = np.array([x["split_width"] for x in split])
        fw = np.array([x["full_ols_width"] for x in split])
        summary["split"] = {
            "intervals": len(split),
            "mean_split_width": float(sw.mean()),
            "mean_full_ols_width": float(fw.mean()),
            "width_ratio": float(sw.mean() / fw.mean()),
            "coverage": float(np.mean([x["split_covered"] for x in split])),
        }
    return WidthComparison(rows, split, summary)
