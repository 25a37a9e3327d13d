"""Signaling mechanisms, target tiers, and interview-graph construction.

Tier indices here are 0-based with the lowest tier first, so tier index ``s``
carries intrinsic value ``s + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Union

import numpy as np

from matchlab.errors import ConfigError
from matchlab.graph import InterviewGraph
from matchlab.market import MarketInstance, TierSpec

Side = Literal["applicant", "firm"]
Untargeted = Literal["none", "lowest"]


@dataclass(frozen=True)
class ApplicantSide:
    d: int
    kind = "applicant"


@dataclass(frozen=True)
class FirmSide:
    d: int
    kind = "firm"


@dataclass(frozen=True)
class BothSide:
    d: int
    kind = "both"


@dataclass(frozen=True)
class MultiTiered:
    d: int
    untargeted: Untargeted = "none"
    kind = "multitier"


@dataclass(frozen=True)
class RestrictedMultiTiered:
    """Multi-tiered signaling where, for each mutual-target tier pair, one side alone signals.

    ``resolver`` maps ``(applicant_tier, firm_tier)`` to the signaling side;
    pairs not listed default to ``"applicant"``.
    """

    d: int
    resolver: dict[tuple[int, int], Side] = field(default_factory=dict)
    untargeted: Untargeted = "none"
    kind = "restricted"

    def signaling_side(self, s: int, kappa: int) -> Side:
        return self.resolver.get((s, kappa), "applicant")


Mechanism = Union[ApplicantSide, FirmSide, BothSide, MultiTiered, RestrictedMultiTiered]

MECHANISM_KINDS = ("applicant", "firm", "both", "multitier", "restricted")


def make_mechanism(kind: str, d: int, **extra: Any) -> Mechanism:
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if kind == "applicant":
        return ApplicantSide(d)
    if kind == "firm":
        return FirmSide(d)
    if kind == "both":
        return BothSide(d)
    if kind == "multitier":
        return MultiTiered(d, extra.get("untargeted", "none"))
    if kind == "restricted":
        resolver = {tuple(k): v for k, v in extra.get("resolver", {}).items()}
        return RestrictedMultiTiered(d, resolver, extra.get("untargeted", "none"))
    raise ConfigError(f"unknown mechanism {kind!r}; expected one of {MECHANISM_KINDS}")


def mechanism_to_json(mech: Mechanism) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": mech.kind, "d": mech.d}
    if isinstance(mech, (MultiTiered, RestrictedMultiTiered)) and mech.untargeted != "none":
        out["untargeted"] = mech.untargeted
    if isinstance(mech, RestrictedMultiTiered) and mech.resolver:
        out["resolver"] = [[s, k, side] for (s, k), side in sorted(mech.resolver.items())]
    return out


def mechanism_from_json(obj: dict[str, Any]) -> Mechanism:
    try:
        kind, d = obj["kind"], int(obj["d"])
    except KeyError as exc:
        raise ConfigError(f"mechanism missing field {exc}") from exc
    resolver = {(int(s), int(k)): side for s, k, side in obj.get("resolver", [])}
    for side in resolver.values():
        if side not in ("applicant", "firm"):
            raise ConfigError(f"resolver side must be 'applicant' or 'firm', got {side!r}")
    untargeted = obj.get("untargeted", "none")
    if untargeted not in ("none", "lowest"):
        raise ConfigError(f"untargeted must be 'none' or 'lowest', got {untargeted!r}")
    return make_mechanism(kind, d, resolver=resolver, untargeted=untargeted)


# ---------------------------------------------------------------------------
# tiers


@dataclass(frozen=True)
class TargetTierMap:
    """Target tier per tier (0-based index into the opposite side's tiers, or None)."""

    applicant_targets: tuple[Optional[int], ...]
    firm_targets: tuple[Optional[int], ...]

    def mutual_pairs(self) -> list[tuple[int, int]]:
        return [
            (s, k)
            for s, k in enumerate(self.applicant_targets)
            if k is not None and self.firm_targets[k] == s
        ]


def _suffix_sums(sizes) -> list[float]:
    out = list(np.cumsum(list(sizes)[::-1])[::-1])
    return [float(x) for x in out]


def target_tiers_from_sizes(app_sizes, firm_sizes) -> TargetTierMap:
    """Tier s dominates tier k when its cumulative count (tier s and above) is at most k's."""
    cum_a = _suffix_sums(app_sizes)
    cum_j = _suffix_sums(firm_sizes)
    app_t = tuple(max((k for k in range(len(cum_j)) if ca <= cum_j[k]), default=None) for ca in cum_a)
    firm_t = tuple(max((s for s in range(len(cum_a)) if cj <= cum_a[s]), default=None) for cj in cum_j)
    return TargetTierMap(app_t, firm_t)


def target_tiers(tiers: TierSpec, n_applicants: int, n_firms: int) -> TargetTierMap:
    return target_tiers_from_sizes(tiers.applicant_sizes(n_applicants), tiers.firm_sizes(n_firms))


def general_imbalance(tiers: TierSpec, n_applicants: int, n_firms: int) -> tuple[bool, float]:
    """Minimum cumulative-count gap over all tier pairs, returned as ``(gap > 0, gap)``."""
    cum_a = _suffix_sums([f * n_applicants for f in tiers.applicant_fractions])
    cum_j = _suffix_sums([f * n_firms for f in tiers.firm_fractions])
    gap = min(abs(x - y) for x in cum_a for y in cum_j)
    if gap <= 1e-9 * max(n_applicants, n_firms):
        gap = 0.0
    return gap > 0, gap


# ---------------------------------------------------------------------------
# graph construction


def _top_d(utility: np.ndarray, jitter: np.ndarray | None, d: int) -> np.ndarray:
    """Column indices of each row's top-d entries; ties broken by smaller jitter."""
    if jitter is None:
        order = np.argsort(-utility, axis=1, kind="stable")
    else:
        order = np.lexsort((jitter, -utility), axis=1)
    return order[:, :d]


def _side_signals(
    inst: MarketInstance, side: Side, d: int, rows: np.ndarray, cols: np.ndarray
) -> list[tuple[int, int]]:
    """Signals from agents ``rows`` of ``side`` to candidates ``cols`` of the other side, as (a, j)."""
    if len(rows) == 0:
        return []
    if d > len(cols):
        raise ConfigError(f"d = {d} exceeds the candidate pool of {len(cols)} for {side} signalers")
    atoms = inst.config.pre_dist.has_atoms
    if side == "applicant":
        util = inst.pre_utility_app[np.ix_(rows, cols)]
        jit = inst.jitter_app_table[np.ix_(rows, cols)] if atoms else None
    else:
        util = inst.pre_utility_firm[np.ix_(cols, rows)].T
        jit = inst.jitter_firm_table[np.ix_(cols, rows)].T if atoms else None
    picks = cols[_top_d(util, jit, d)]
    out = []
    for r, chosen in zip(rows, picks):
        for c in chosen:
            out.append((int(r), int(c)) if side == "applicant" else (int(c), int(r)))
    return out


def signal_sets(inst: MarketInstance, mech: Mechanism) -> dict[Side, list[tuple[int, int]]]:
    """Signals sent by each side, as local ``(a, j)`` pairs."""
    if mech.d < 1:
        raise ConfigError("d must be >= 1")
    all_a = np.arange(inst.n_applicants)
    all_j = np.arange(inst.n_firms)
    out: dict[Side, list[tuple[int, int]]] = {"applicant": [], "firm": []}
    if isinstance(mech, (ApplicantSide, BothSide)):
        out["applicant"] = _side_signals(inst, "applicant", mech.d, all_a, all_j)
    if isinstance(mech, (FirmSide, BothSide)):
        out["firm"] = _side_signals(inst, "firm", mech.d, all_j, all_a)
    if isinstance(mech, (MultiTiered, RestrictedMultiTiered)):
        tmap = target_tiers(inst.config.tiers, inst.n_applicants, inst.n_firms)
        restricted = isinstance(mech, RestrictedMultiTiered)
        mutual = set(tmap.mutual_pairs())
        for s, k in enumerate(tmap.applicant_targets):
            if k is None:
                if mech.untargeted != "lowest":
                    continue
                k = 0
            if restricted and (s, k) in mutual and mech.signaling_side(s, k) != "applicant":
                continue
            rows = np.flatnonzero(inst.applicant_tier == s)
            cols = np.flatnonzero(inst.firm_tier == k)
            out["applicant"] += _side_signals(inst, "applicant", mech.d, rows, cols)
        for k, s in enumerate(tmap.firm_targets):
            if s is None:
                if mech.untargeted != "lowest":
                    continue
                s = 0
            if restricted and (s, k) in mutual and mech.signaling_side(s, k) != "firm":
                continue
            rows = np.flatnonzero(inst.firm_tier == k)
            cols = np.flatnonzero(inst.applicant_tier == s)
            out["firm"] += _side_signals(inst, "firm", mech.d, rows, cols)
    return out


def build_interview_graph(inst: MarketInstance, mech: Mechanism) -> InterviewGraph:
    """Edge set is the union of all signals sent under ``mech``."""
    sigs = signal_sets(inst, mech)
    return InterviewGraph.from_edges(inst.n_applicants, inst.n_firms, sigs["applicant"] + sigs["firm"])
