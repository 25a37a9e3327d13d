"""Scenario runner: seeded trials over a parameter sweep, CSV output, and summary statistics."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from matchlab import streams
from matchlab.errors import ConfigError
from matchlab.market import MarketConfig, Normal, PointMass, Uniform, p_nonneg, sample_market
from matchlab.matching import (
    almost_stable_witness,
    deferred_acceptance,
    interim_blocking_report,
    mean_applicant_rank,
    preferences,
)
from matchlab.signaling import (
    ApplicantSide,
    BothSide,
    Mechanism,
    build_interview_graph,
    mechanism_from_json,
    mechanism_to_json,
)

log = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("d", "n_applicants", "n_firms")
CSV_COLUMNS = (
    "trial",
    "seed",
    "n_applicants",
    "n_firms",
    "d",
    "mechanism",
    "dist_pre",
    "dist_post",
    "applicants_blocked",
    "firms_blocked",
    "blocking_pairs",
    "perfect_stable",
    "witness_size",
    "unmatched_applicants",
    "unmatched_firms",
    "mean_applicant_rank",
    "runtime_ms",
)
METRICS = (
    "applicants_blocked",
    "firms_blocked",
    "blocking_pairs",
    "perfect_stable",
    "witness_size",
    "unmatched_applicants",
    "unmatched_firms",
    "mean_applicant_rank",
)


@dataclass(frozen=True)
class ScenarioConfig:
    market: MarketConfig
    mechanism: Mechanism
    sweep_parameter: Optional[str] = None
    sweep_values: tuple[int, ...] = ()
    trials: int = 1
    proposing_side: str = "applicant"
    epsilon: Optional[float] = None
    metrics: tuple[str, ...] = METRICS
    output: Optional[str] = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.proposing_side not in ("applicant", "firm"):
            raise ConfigError(f"proposing_side must be 'applicant' or 'firm', got {self.proposing_side!r}")
        if self.sweep_parameter is not None:
            if self.sweep_parameter not in SWEEP_PARAMETERS:
                raise ConfigError(f"cannot sweep {self.sweep_parameter!r}; choose from {SWEEP_PARAMETERS}")
            if not self.sweep_values:
                raise ConfigError("sweep needs at least one value")
            if any(int(v) != v or v < 1 for v in self.sweep_values):
                raise ConfigError("sweep values must be positive integers")
            object.__setattr__(self, "sweep_values", tuple(int(v) for v in self.sweep_values))
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")

    def points(self) -> list[tuple[int, MarketConfig, Mechanism]]:
        """``(sweep value, market, mechanism)`` per sweep point; value 0 when nothing is swept."""
        if self.sweep_parameter is None:
            return [(0, self.market, self.mechanism)]
        out = []
        for v in self.sweep_values:
            if self.sweep_parameter == "d":
                out.append((v, self.market, replace(self.mechanism, d=v)))
            else:
                out.append((v, self.market.replace(**{self.sweep_parameter: v}), self.mechanism))
        return out

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "market": self.market.to_json(),
            "mechanism": mechanism_to_json(self.mechanism),
            "trials": self.trials,
            "proposing_side": self.proposing_side,
            "epsilon": self.epsilon,
            "metrics": list(self.metrics),
            "output": self.output,
        }
        if self.sweep_parameter is not None:
            doc["sweep"] = {"parameter": self.sweep_parameter, "values": list(self.sweep_values)}
        return doc

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ScenarioConfig":
        known = {"market", "mechanism", "sweep", "trials", "proposing_side", "epsilon", "metrics", "output"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        if "market" not in obj or "mechanism" not in obj:
            raise ConfigError("scenario needs 'market' and 'mechanism'")
        sweep = obj.get("sweep") or {}
        return cls(
            market=MarketConfig.from_json(obj["market"]),
            mechanism=mechanism_from_json(obj["mechanism"]),
            sweep_parameter=sweep.get("parameter"),
            sweep_values=tuple(sweep.get("values", ())),
            trials=int(obj.get("trials", 1)),
            proposing_side=obj.get("proposing_side", "applicant"),
            epsilon=obj.get("epsilon"),
            metrics=tuple(obj.get("metrics", METRICS)),
            output=obj.get("output"),
        )


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    n_applicants: int
    n_firms: int
    d: int
    mechanism: str
    dist_pre: str
    dist_post: str
    applicants_blocked: Optional[int] = None
    firms_blocked: Optional[int] = None
    blocking_pairs: Optional[int] = None
    perfect_stable: Optional[bool] = None
    witness_size: Optional[int] = None
    unmatched_applicants: Optional[int] = None
    unmatched_firms: Optional[int] = None
    mean_applicant_rank: Optional[float] = None
    runtime_ms: float = 0.0
    sweep_value: int = 0
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def csv_row(self) -> list[str]:
        row = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            if v is None:
                row.append("")
            elif isinstance(v, bool):
                row.append("true" if v else "false")
            elif isinstance(v, float):
                row.append("nan" if math.isnan(v) else f"{v:.6f}")
            else:
                row.append(str(v))
        return row


def trial_seed(base_seed: int, sweep_value: int, trial: int) -> int:
    return streams.mix_seed(base_seed, sweep_value, trial)


def run_trial(
    market: MarketConfig,
    mech: Mechanism,
    trial: int,
    seed: int,
    proposing_side: str = "applicant",
    sweep_value: int = 0,
    timing: bool = False,
) -> TrialRecord:
    """sample -> signal -> DA -> interim report -> witness, for one seed."""
    base = dict(
        trial=trial,
        seed=seed,
        n_applicants=market.n_applicants,
        n_firms=market.n_firms,
        d=mech.d,
        mechanism=mech.kind,
        dist_pre=market.pre_dist.tag,
        dist_post=market.post_dist.tag,
        sweep_value=sweep_value,
    )
    start = time.perf_counter()
    try:
        inst = sample_market(market.replace(seed=seed))
        graph = build_interview_graph(inst, mech)
        prefs = preferences(inst, graph)
        matching = deferred_acceptance(inst, graph, proposing_side, prefs=prefs)
        report = interim_blocking_report(inst, graph, matching)
        witness = almost_stable_witness(inst, graph)
    except Exception as exc:  # a failed trial is recorded, never fatal to the sweep
        log.warning("trial %d (seed %d) failed: %s", trial, seed, exc)
        return TrialRecord(**base, error=f"{type(exc).__name__}: {exc}")
    elapsed = (time.perf_counter() - start) * 1000 if timing else 0.0
    return TrialRecord(
        **base,
        applicants_blocked=report.applicants_blocked,
        firms_blocked=report.firms_blocked,
        blocking_pairs=report.n_pairs,
        perfect_stable=report.n_pairs == 0,
        witness_size=len(witness.witness),
        unmatched_applicants=matching.unmatched_applicants(),
        unmatched_firms=matching.unmatched_firms(),
        mean_applicant_rank=mean_applicant_rank(prefs, matching),
        runtime_ms=elapsed,
    )


def _run_task(args: tuple) -> TrialRecord:
    return run_trial(*args)


def run_scenario(cfg: ScenarioConfig, threads: int = 1, timing: bool = False) -> list[TrialRecord]:
    """All trials of all sweep points, sorted by (sweep value order, trial)."""
    tasks = []
    for value, market, mech in cfg.points():
        for t in range(cfg.trials):
            seed = trial_seed(cfg.market.seed, value, t)
            tasks.append((market, mech, t, seed, cfg.proposing_side, value, timing))
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(t) for t in tasks]
    order = {v: i for i, (v, _, _) in enumerate(cfg.points())}
    return sorted(records, key=lambda r: (order[r.sweep_value], r.trial))


def records_to_csv(records: Iterable[TrialRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(r.csv_row())
    return buf.getvalue()


@dataclass(frozen=True)
class AggregateRow:
    sweep_value: int
    n_trials: int
    n_failed: int
    mean: dict[str, float]
    se: dict[str, float]
    almost_stable_rate: Optional[float] = None


def aggregate(
    records: Sequence[TrialRecord], metrics: Sequence[str] = METRICS, epsilon: Optional[float] = None
) -> list[AggregateRow]:
    """Mean and standard error per metric for each sweep value, in first-seen order.

    With ``epsilon`` set, also reports the share of trials whose witness set is
    at most ``epsilon * n_applicants``.
    """
    if not records:
        raise ConfigError("aggregate needs at least one record")
    groups: dict[int, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault(r.sweep_value, []).append(r)
    rows = []
    for value, group in groups.items():
        ok = [r for r in group if not r.failed]
        mean, se = {}, {}
        for m in metrics:
            vals = np.array([float(getattr(r, m)) for r in ok], dtype=float)
            vals = vals[~np.isnan(vals)]
            mean[m] = float(vals.mean()) if vals.size else float("nan")
            se[m] = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        rate = None
        if epsilon is not None and ok:
            rate = sum(r.witness_size <= epsilon * r.n_applicants for r in ok) / len(ok)
        rows.append(AggregateRow(value, len(group), len(group) - len(ok), mean, se, rate))
    return rows


def aggregate_to_csv(rows: Sequence[AggregateRow], metrics: Sequence[str] = METRICS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["sweep_value", "n_trials", "n_failed"]
    for m in metrics:
        header += [f"{m}_mean", f"{m}_se"]
    has_rate = any(r.almost_stable_rate is not None for r in rows)
    if has_rate:
        header.append("almost_stable_rate")
    writer.writerow(header)
    for r in rows:
        line = [str(r.sweep_value), str(r.n_trials), str(r.n_failed)]
        for m in metrics:
            line += [f"{r.mean[m]:.6f}", f"{r.se[m]:.6f}"]
        if has_rate:
            line.append("" if r.almost_stable_rate is None else f"{r.almost_stable_rate:.6f}")
        writer.writerow(line)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# preset scenarios


def d_sweep_scenario(
    n: int = 1000, d_values: Sequence[int] = tuple(range(1, 51)), trials: int = 10, seed: int = 0
) -> ScenarioConfig:
    """Balanced market, applicant signaling, sweep over d."""
    market = MarketConfig(n, n, pre_dist=Normal(0.0, 1.0), post_dist=Uniform(-1.0, 1.0), seed=seed)
    return ScenarioConfig(market, ApplicantSide(d_values[0]), "d", tuple(d_values), trials)


def imbalance_scenario(
    d: int = 20,
    n_applicants: Sequence[int] = (800, 900, 1000, 1100, 1200),
    n_firms: int = 1000,
    trials: int = 10,
    seed: int = 0,
) -> ScenarioConfig:
    """Imbalanced markets, applicant signaling, sweep over the number of applicants."""
    market = MarketConfig(n_applicants[0], n_firms, pre_dist=Normal(0.0, 1.0), post_dist=Uniform(-1.0, 1.0), seed=seed)
    return ScenarioConfig(market, ApplicantSide(d), "n_applicants", tuple(n_applicants), trials)


def degenerate_scores_scenario(variant: str, n: int = 1000, d: int = 10, trials: int = 10, seed: int = 0) -> ScenarioConfig:
    """Both-side signaling; variant 'a' has no post-interview signal, 'b' no pre-interview signal."""
    if variant == "a":
        market = MarketConfig(n, n, pre_dist=Normal(0.0, 1.0), post_dist=PointMass(0.0), seed=seed)
    elif variant == "b":
        market = MarketConfig(n, n, pre_dist=PointMass(0.0), post_dist=Uniform(-1.0, 1.0), seed=seed)
    else:
        raise ConfigError(f"unknown variant {variant!r}")
    return ScenarioConfig(market, BothSide(d), trials=trials)


def signals_for_perfect_stability(n_applicants: int, n_firms: int, p: float) -> int:
    """Signal count ``ceil(8/(delta p) * log(1/(1 - delta + delta^2/n_firms)) * log n_applicants)``."""
    delta = n_applicants / n_firms
    if not 0 < delta < 1:
        raise ConfigError("needs fewer applicants than firms")
    value = 8 / (delta * p) * math.log(1 / (1 - delta + delta**2 / n_firms)) * math.log(n_applicants)
    return math.ceil(value)


def perfect_stability_scenario(n_applicants: int = 400, n_firms: int = 500, trials: int = 20, seed: int = 0) -> ScenarioConfig:
    post = Uniform(-1.0, 1.0)
    d = signals_for_perfect_stability(n_applicants, n_firms, p_nonneg(post))
    market = MarketConfig(n_applicants, n_firms, pre_dist=Normal(0.0, 1.0), post_dist=post, seed=seed)
    return ScenarioConfig(market, ApplicantSide(d), trials=trials)


PRESETS = {
    "imbalance": imbalance_scenario,
    "d_sweep": d_sweep_scenario,
    "degenerate_a": lambda **kw: degenerate_scores_scenario("a", **kw),
    "degenerate_b": lambda **kw: degenerate_scores_scenario("b", **kw),
    "perfect_stability": perfect_stability_scenario,
}
