"""Markets, score distributions, utilities, and the scalar quantities p and q.

Agents are addressed by global vertex ids: applicants ``0..n_applicants-1``,
firms ``n_applicants..n_applicants+n_firms-1``.  Score tables are indexed by
local ``[a, j]`` pairs regardless of direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Any, Sequence, Union

import numpy as np
from scipy import special

from matchlab import streams
from matchlab.errors import ConfigError, DomainError

if TYPE_CHECKING:
    from matchlab.graph import InterviewGraph

QUANTILE_SAMPLES = 1_000_000
_INTERNAL_SEED = 0x5EED_0F_CAFE


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ConfigError(f"Uniform requires lo < hi, got ({self.lo}, {self.hi})")

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u

    def cdf(self, x: float) -> float:
        return float(np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0))

    def prob_gt(self, x: float) -> float:
        return 1.0 - self.cdf(x)

    def prob_ge(self, x: float) -> float:
        return 1.0 - self.cdf(x)

    def quantile(self, q: float) -> float:
        return self.lo + q * (self.hi - self.lo)

    @property
    def upper(self) -> float:
        return self.hi

    @property
    def lower(self) -> float:
        return self.lo

    @property
    def has_atoms(self) -> bool:
        return False

    @property
    def tag(self) -> str:
        return f"uniform:{self.lo:g},{self.hi:g}"


@dataclass(frozen=True)
class Normal:
    mean: float
    var: float

    def __post_init__(self) -> None:
        if not (self.var > 0 and math.isfinite(self.var) and math.isfinite(self.mean)):
            raise ConfigError(f"Normal requires var > 0, got {self.var}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return self.mean + self.sd * special.ndtri(u)

    def cdf(self, x: float) -> float:
        return float(special.ndtr((x - self.mean) / self.sd))

    def prob_gt(self, x: float) -> float:
        return float(special.ndtr((self.mean - x) / self.sd))

    prob_ge = prob_gt

    def quantile(self, q: float) -> float:
        return float(self.mean + self.sd * special.ndtri(q))

    @property
    def upper(self) -> float:
        return math.inf

    @property
    def lower(self) -> float:
        return -math.inf

    @property
    def has_atoms(self) -> bool:
        return False

    @property
    def tag(self) -> str:
        return f"normal:{self.mean:g},{self.var:g}"


@dataclass(frozen=True)
class PointMass:
    c: float = 0.0

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return np.full(np.shape(u), float(self.c))

    def cdf(self, x: float) -> float:
        return 1.0 if x >= self.c else 0.0

    def prob_gt(self, x: float) -> float:
        return 1.0 if self.c > x else 0.0

    def prob_ge(self, x: float) -> float:
        return 1.0 if self.c >= x else 0.0

    def quantile(self, q: float) -> float:
        return float(self.c)

    @property
    def upper(self) -> float:
        return float(self.c)

    @property
    def lower(self) -> float:
        return float(self.c)

    @property
    def has_atoms(self) -> bool:
        return True

    @property
    def tag(self) -> str:
        return f"pointmass:{self.c:g}"


@dataclass(frozen=True)
class Rademacher:
    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(u) < 0.5, -1.0, 1.0)

    def cdf(self, x: float) -> float:
        return 0.0 if x < -1 else (0.5 if x < 1 else 1.0)

    def prob_gt(self, x: float) -> float:
        return 1.0 - self.cdf(x)

    def prob_ge(self, x: float) -> float:
        return (0.5 if -1 >= x else 0.0) + (0.5 if 1 >= x else 0.0)

    def quantile(self, q: float) -> float:
        return -1.0 if q <= 0.5 else 1.0

    @property
    def upper(self) -> float:
        return 1.0

    @property
    def lower(self) -> float:
        return -1.0

    @property
    def has_atoms(self) -> bool:
        return True

    @property
    def tag(self) -> str:
        return "rademacher"


@dataclass(frozen=True)
class Mixture:
    """Finite mixture; ``components`` is a sequence of ``(weight, distribution)``."""

    components: tuple[tuple[float, "ScoreDistribution"], ...]

    def __post_init__(self) -> None:
        comps = tuple((float(w), d) for w, d in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ConfigError("Mixture needs at least one component")
        if any(w < 0 for w, _ in comps):
            raise ConfigError("Mixture weights must be non-negative")
        if abs(sum(w for w, _ in comps) - 1.0) > 1e-12:
            raise ConfigError("Mixture weights must sum to 1")

    def cdf(self, x: float) -> float:
        return sum(w * d.cdf(x) for w, d in self.components)

    def prob_gt(self, x: float) -> float:
        return sum(w * d.prob_gt(x) for w, d in self.components)

    def prob_ge(self, x: float) -> float:
        return sum(w * d.prob_ge(x) for w, d in self.components)

    def quantile(self, q: float) -> float:
        return _invert_cdf(self.cdf, q, self.lower, self.upper)

    @property
    def upper(self) -> float:
        return max(d.upper for w, d in self.components if w > 0)

    @property
    def lower(self) -> float:
        return min(d.lower for w, d in self.components if w > 0)

    @property
    def has_atoms(self) -> bool:
        return any(d.has_atoms for w, d in self.components if w > 0)

    @property
    def tag(self) -> str:
        inner = "+".join(f"{w:g}*{d.tag}" for w, d in self.components)
        return f"mixture({inner})"


ScoreDistribution = Union[Uniform, Normal, PointMass, Rademacher, Mixture]


def parse_dist(spec: str) -> ScoreDistribution:
    """Parse a literal such as ``uniform:-1,1``, ``normal:0,1``, ``pointmass:0``, ``rademacher``."""
    text = spec.strip().lower()
    name, _, args = text.partition(":")
    try:
        values = [float(v) for v in args.split(",")] if args else []
    except ValueError as exc:
        raise ConfigError(f"bad distribution literal {spec!r}") from exc
    arity = {"uniform": 2, "normal": 2, "pointmass": 1, "rademacher": 0}
    if name not in arity:
        raise ConfigError(f"unknown distribution {name!r} in {spec!r}")
    if len(values) != arity[name]:
        raise ConfigError(f"{name} takes {arity[name]} parameters, got {len(values)} in {spec!r}")
    if name == "uniform":
        return Uniform(*values)
    if name == "normal":
        return Normal(*values)
    if name == "pointmass":
        return PointMass(*values)
    return Rademacher()


def dist_to_json(dist: ScoreDistribution) -> Any:
    if isinstance(dist, Mixture):
        return {"mixture": [[w, dist_to_json(d)] for w, d in dist.components]}
    return dist.tag


def dist_from_json(obj: Any) -> ScoreDistribution:
    if isinstance(obj, str):
        return parse_dist(obj)
    if isinstance(obj, dict) and "mixture" in obj:
        return Mixture(tuple((float(w), dist_from_json(d)) for w, d in obj["mixture"]))
    raise ConfigError(f"cannot read distribution from {obj!r}")


def sample_keyed(dist: ScoreDistribution, seed: int, role: int, a, j, counter: int = 0) -> np.ndarray:
    """Draw ``dist`` at every key ``(seed, role, a, j, counter)``; a pure function of its inputs."""
    if isinstance(dist, Mixture):
        sel = streams.keyed_uniform(seed, role, a, j, counter * 32 + 1)
        cum = np.cumsum([w for w, _ in dist.components])
        cum[-1] = 1.0
        idx = np.searchsorted(cum, sel, side="right")
        out = np.zeros(np.shape(sel))
        for i, (_, comp) in enumerate(dist.components):
            mask = idx == i
            if np.any(mask):
                vals = sample_keyed(comp, seed, role, a, j, counter * 32 + 2 + i)
                out = np.where(mask, vals, out)
        return out
    return dist.from_uniform(streams.keyed_uniform(seed, role, a, j, counter))


# ---------------------------------------------------------------------------
# closed forms for sums of independent scores


def _atoms(dist: ScoreDistribution) -> list[tuple[float, float]] | None:
    if isinstance(dist, PointMass):
        return [(1.0, float(dist.c))]
    if isinstance(dist, Rademacher):
        return [(0.5, -1.0), (0.5, 1.0)]
    return None


def _ramp2(s: float) -> float:
    return 0.5 * s * s if s > 0 else 0.0


def _normal_antideriv(z: float) -> float:
    # d/dz [z Phi(z) + phi(z)] = Phi(z)
    return z * float(special.ndtr(z)) + math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


def sum_prob_gt(x: ScoreDistribution, y: ScoreDistribution, t: float) -> float | None:
    """Exact ``P[X + Y > t]`` for independent X, Y when a closed form is registered, else None."""
    if isinstance(x, Mixture):
        parts = [sum_prob_gt(c, y, t) for _, c in x.components]
        return None if any(p is None for p in parts) else sum(w * p for (w, _), p in zip(x.components, parts))
    if isinstance(y, Mixture):
        return sum_prob_gt(y, x, t)
    atoms = _atoms(x)
    if atoms is not None:
        return sum(w * y.prob_gt(t - c) for w, c in atoms)
    atoms = _atoms(y)
    if atoms is not None:
        return sum(w * x.prob_gt(t - c) for w, c in atoms)
    if isinstance(x, Normal) and isinstance(y, Normal):
        return Normal(x.mean + y.mean, x.var + y.var).prob_gt(t)
    if isinstance(x, Uniform) and isinstance(y, Uniform):
        area = (
            _ramp2(t - x.lo - y.lo)
            - _ramp2(t - x.hi - y.lo)
            - _ramp2(t - x.lo - y.hi)
            + _ramp2(t - x.hi - y.hi)
        )
        cdf = area / ((x.hi - x.lo) * (y.hi - y.lo))
        return float(np.clip(1.0 - cdf, 0.0, 1.0))
    if isinstance(x, Uniform) and isinstance(y, Normal):
        x, y = y, x
    if isinstance(x, Normal) and isinstance(y, Uniform):
        sd = x.sd
        za = (t - y.lo - x.mean) / sd
        zb = (t - y.hi - x.mean) / sd
        cdf = sd * (_normal_antideriv(za) - _normal_antideriv(zb)) / (y.hi - y.lo)
        return float(np.clip(1.0 - cdf, 0.0, 1.0))
    return None


def _invert_cdf(cdf, q: float, lo: float, hi: float) -> float:
    """Smallest x with cdf(x) >= q, by bisection."""
    if not math.isfinite(lo):
        lo = -1.0
        while cdf(lo) >= q:
            lo *= 2.0
    if not math.isfinite(hi):
        hi = 1.0
        while cdf(hi) < q:
            hi *= 2.0
    if cdf(lo) >= q:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if cdf(mid) >= q:
            hi = mid
        else:
            lo = mid
    return hi


def _sum_samples(x: ScoreDistribution, y: ScoreDistribution) -> np.ndarray:
    idx = np.arange(QUANTILE_SAMPLES, dtype=np.int64)
    role = streams.ROLE_INTERNAL
    return sample_keyed(x, _INTERNAL_SEED, role, idx, 0) + sample_keyed(y, _INTERNAL_SEED, role, idx, 1)


def sum_quantile(x: ScoreDistribution, y: ScoreDistribution, q: float) -> float:
    """q-quantile of X + Y (closed-form CDF inversion, else 10^6-sample empirical quantile)."""
    if sum_prob_gt(x, y, 0.0) is None:
        return float(np.quantile(_sum_samples(x, y), q, method="inverted_cdf"))
    cdf = lambda t: 1.0 - sum_prob_gt(x, y, t)  # noqa: E731
    return _invert_cdf(cdf, q, x.lower + y.lower, x.upper + y.upper)


# ---------------------------------------------------------------------------
# scalar quantities


def p_nonneg(dist: ScoreDistribution) -> float:
    """Probability that a post-interview score is non-negative (``A >= 0``)."""
    return float(dist.prob_ge(0.0))


def outweighs(pre: ScoreDistribution, post: ScoreDistribution, k1: int, k2: int) -> bool:
    """Whether pre-interview scores outweigh post-interview scores in the (k1, k2) range.

    True iff the ``k1/(k1+1)`` quantile of the law of A + B is
    strictly below the ``k2/(k2+1)`` quantile of ``pre``.
    """
    if k1 < 1 or k2 < 1:
        raise DomainError("k1 and k2 must be >= 1")
    q_sum = sum_quantile(post, pre, k1 / (k1 + 1))
    q_pre = pre.quantile(k2 / (k2 + 1))
    return bool(q_sum < q_pre)


def compute_q(pre: ScoreDistribution, post: ScoreDistribution) -> float:
    """``P[A + B > M_A + M_B - 1]`` for bounded A ~ post, B ~ pre."""
    m_a, m_b = post.upper, pre.upper
    if not (math.isfinite(m_a) and math.isfinite(m_b)):
        raise DomainError("compute_q needs distributions bounded above")
    threshold = m_a + m_b - 1.0
    exact = sum_prob_gt(post, pre, threshold)
    if exact is not None:
        return float(exact)
    return float(np.mean(_sum_samples(post, pre) > threshold))


# ---------------------------------------------------------------------------
# tiers and configuration


def largest_remainder(fractions: Sequence[float], n: int) -> list[int]:
    """Apportion ``n`` agents to tiers; ties in the remainder go to the lower index."""
    raw = [f * n for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    left = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:left]:
        counts[i] += 1
    return counts


@dataclass(frozen=True)
class TierSpec:
    """Tier fractions, lowest tier first (tier index s carries intrinsic value s)."""

    applicant_fractions: tuple[float, ...] = (1.0,)
    firm_fractions: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        for name in ("applicant_fractions", "firm_fractions"):
            fr = tuple(float(x) for x in getattr(self, name))
            object.__setattr__(self, name, fr)
            if not fr:
                raise ConfigError(f"{name} is empty")
            if any(x <= 0 for x in fr):
                raise ConfigError(f"{name} entries must be positive")
            if abs(sum(fr) - 1.0) > 1e-9:
                raise ConfigError(f"{name} must sum to 1")

    @property
    def is_multi_tier(self) -> bool:
        return len(self.applicant_fractions) > 1 or len(self.firm_fractions) > 1

    def applicant_sizes(self, n_applicants: int) -> list[int]:
        return largest_remainder(self.applicant_fractions, n_applicants)

    def firm_sizes(self, n_firms: int) -> list[int]:
        return largest_remainder(self.firm_fractions, n_firms)


@dataclass(frozen=True)
class MarketConfig:
    n_applicants: int
    n_firms: int
    pre_dist: ScoreDistribution = field(default_factory=lambda: Normal(0.0, 1.0))
    post_dist: ScoreDistribution = field(default_factory=lambda: Uniform(-1.0, 1.0))
    tiers: TierSpec = field(default_factory=TierSpec)
    # (probability, distribution of firms' post-scores toward applicants of that type)
    applicant_type_mixture: tuple[tuple[float, ScoreDistribution], ...] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_applicants < 1 or self.n_firms < 1:
            raise ConfigError("a market needs at least one applicant and one firm")
        if self.applicant_type_mixture is not None:
            mix = tuple((float(w), d) for w, d in self.applicant_type_mixture)
            object.__setattr__(self, "applicant_type_mixture", mix)
            Mixture(mix)  # validates weights

    def replace(self, **changes: Any) -> "MarketConfig":
        from dataclasses import replace

        return replace(self, **changes)

    def to_json(self) -> dict[str, Any]:
        return {
            "n_applicants": self.n_applicants,
            "n_firms": self.n_firms,
            "tiers": {
                "applicant_fractions": list(self.tiers.applicant_fractions),
                "firm_fractions": list(self.tiers.firm_fractions),
            },
            "pre_dist": dist_to_json(self.pre_dist),
            "post_dist": dist_to_json(self.post_dist),
            "applicant_type_mixture": None
            if self.applicant_type_mixture is None
            else [[w, dist_to_json(d)] for w, d in self.applicant_type_mixture],
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "MarketConfig":
        known = {"n_applicants", "n_firms", "tiers", "pre_dist", "post_dist", "applicant_type_mixture", "seed"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown market fields: {sorted(unknown)}")
        tiers = obj.get("tiers") or {}
        mixture = obj.get("applicant_type_mixture")
        try:
            return cls(
                n_applicants=int(obj["n_applicants"]),
                n_firms=int(obj["n_firms"]),
                pre_dist=dist_from_json(obj.get("pre_dist", "normal:0,1")),
                post_dist=dist_from_json(obj.get("post_dist", "uniform:-1,1")),
                tiers=TierSpec(
                    tuple(tiers.get("applicant_fractions", (1.0,))),
                    tuple(tiers.get("firm_fractions", (1.0,))),
                ),
                applicant_type_mixture=None
                if mixture is None
                else tuple((float(w), dist_from_json(d)) for w, d in mixture),
                seed=int(obj.get("seed", 0)),
            )
        except KeyError as exc:
            raise ConfigError(f"market config missing field {exc}") from exc


# ---------------------------------------------------------------------------
# instances


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarketInstance:
    """Sampled market.  Treat as immutable; all arrays are read-only."""

    config: MarketConfig
    applicant_tier: np.ndarray
    firm_tier: np.ndarray
    applicant_value: np.ndarray
    firm_value: np.ndarray
    pre_app: np.ndarray  # [a, j] -> B_{a,j}
    pre_firm: np.ndarray  # [a, j] -> B_{j,a}
    applicant_type: np.ndarray | None = None
    # explicit A-score tables ([a, j] for both directions) replacing the keyed streams
    post_tables: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def n_applicants(self) -> int:
        return self.config.n_applicants

    @property
    def n_firms(self) -> int:
        return self.config.n_firms

    @property
    def n_agents(self) -> int:
        return self.n_applicants + self.n_firms

    @property
    def seed(self) -> int:
        return self.config.seed

    def is_applicant(self, v: int) -> bool:
        return 0 <= v < self.n_applicants

    def firm_vertex(self, j: int) -> int:
        return self.n_applicants + j

    def split_pair(self, viewer: int, target: int) -> tuple[int, int, bool]:
        """Return ``(a, j, viewer_is_applicant)`` for an opposite-side vertex pair."""
        n_a, n = self.n_applicants, self.n_agents
        if not (0 <= viewer < n and 0 <= target < n):
            raise DomainError(f"unknown agent in pair ({viewer}, {target})")
        if (viewer < n_a) == (target < n_a):
            raise DomainError(f"agents {viewer} and {target} are on the same side")
        if viewer < n_a:
            return viewer, target - n_a, True
        return target, viewer - n_a, False

    # keyed per-pair draws (vectorized over a, j)

    def post_score_app(self, a, j) -> np.ndarray:
        """A_{a,j}: applicant a's post-interview score of firm j."""
        if self.post_tables is not None:
            return self.post_tables[0][a, j]
        return sample_keyed(self.config.post_dist, self.seed, streams.ROLE_A_APP, a, j)

    def post_score_firm(self, a, j) -> np.ndarray:
        """A_{j,a}: firm j's post-interview score of applicant a."""
        if self.post_tables is not None:
            return self.post_tables[1][a, j]
        mixture = self.config.applicant_type_mixture
        if mixture is None:
            return sample_keyed(self.config.post_dist, self.seed, streams.ROLE_A_FIRM, a, j)
        a_arr = np.asarray(a)
        types = self.applicant_type[a_arr]
        out = np.zeros(np.broadcast(a_arr, np.asarray(j)).shape)
        for t, (_, dist) in enumerate(mixture):
            vals = sample_keyed(dist, self.seed, streams.ROLE_A_FIRM, a, j)
            out = np.where(types == t, vals, out)
        return out

    def jitter_app(self, a, j) -> np.ndarray:
        return streams.keyed_uniform(self.seed, streams.ROLE_JITTER_APP, a, j)

    def jitter_firm(self, a, j) -> np.ndarray:
        return streams.keyed_uniform(self.seed, streams.ROLE_JITTER_FIRM, a, j)

    @cached_property
    def pre_utility_app(self) -> np.ndarray:
        """U^B_{a,j} table."""
        return _readonly(self.pre_app + self.firm_value[None, :])

    @cached_property
    def pre_utility_firm(self) -> np.ndarray:
        """U^B_{j,a} table, indexed ``[a, j]``."""
        return _readonly(self.pre_firm + self.applicant_value[:, None])

    @cached_property
    def jitter_app_table(self) -> np.ndarray:
        a, j = np.meshgrid(np.arange(self.n_applicants), np.arange(self.n_firms), indexing="ij")
        return _readonly(self.jitter_app(a, j))

    @cached_property
    def jitter_firm_table(self) -> np.ndarray:
        a, j = np.meshgrid(np.arange(self.n_applicants), np.arange(self.n_firms), indexing="ij")
        return _readonly(self.jitter_firm(a, j))


def _tier_labels(sizes: list[int]) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def sample_market(config: MarketConfig) -> MarketInstance:
    """Materialize pre-interview score tables and tier labels for ``config``."""
    n_a, n_j = config.n_applicants, config.n_firms
    app_sizes = config.tiers.applicant_sizes(n_a)
    firm_sizes = config.tiers.firm_sizes(n_j)
    if min(app_sizes) < 1 or min(firm_sizes) < 1:
        raise ConfigError(f"empty tier: applicant sizes {app_sizes}, firm sizes {firm_sizes}")
    app_tier = _tier_labels(app_sizes)
    firm_tier = _tier_labels(firm_sizes)
    if config.tiers.is_multi_tier:
        app_value = (app_tier + 1).astype(float)
        firm_value = (firm_tier + 1).astype(float)
    else:
        app_value = np.zeros(n_a)
        firm_value = np.zeros(n_j)
    a, j = np.meshgrid(np.arange(n_a), np.arange(n_j), indexing="ij")
    pre_app = sample_keyed(config.pre_dist, config.seed, streams.ROLE_B_APP, a, j)
    pre_firm = sample_keyed(config.pre_dist, config.seed, streams.ROLE_B_FIRM, a, j)
    types = None
    if config.applicant_type_mixture is not None:
        u = streams.keyed_uniform(config.seed, streams.ROLE_TYPE_APP, np.arange(n_a), 0)
        cum = np.cumsum([w for w, _ in config.applicant_type_mixture])
        cum[-1] = 1.0
        types = _readonly(np.searchsorted(cum, u, side="right"))
    return MarketInstance(
        config=config,
        applicant_tier=_readonly(app_tier),
        firm_tier=_readonly(firm_tier),
        applicant_value=_readonly(app_value),
        firm_value=_readonly(firm_value),
        pre_app=_readonly(np.asarray(pre_app, dtype=float)),
        pre_firm=_readonly(np.asarray(pre_firm, dtype=float)),
        applicant_type=types,
    )


def instance_from_tables(
    pre_app,
    pre_firm,
    post_app,
    post_firm,
    applicant_value=None,
    firm_value=None,
) -> MarketInstance:
    """Instance with explicit score tables, all indexed ``[a, j]``; values default to 0."""
    tables = [np.array(t, dtype=float) for t in (pre_app, pre_firm, post_app, post_firm)]
    shape = tables[0].shape
    if len(shape) != 2 or any(t.shape != shape for t in tables):
        raise ConfigError("score tables must share one 2-d shape")
    n_a, n_j = shape
    app_value = np.zeros(n_a) if applicant_value is None else np.array(applicant_value, dtype=float)
    firm_value = np.zeros(n_j) if firm_value is None else np.array(firm_value, dtype=float)
    return MarketInstance(
        config=MarketConfig(n_a, n_j),
        applicant_tier=_readonly(np.zeros(n_a, dtype=np.int64)),
        firm_tier=_readonly(np.zeros(n_j, dtype=np.int64)),
        applicant_value=_readonly(app_value),
        firm_value=_readonly(firm_value),
        pre_app=_readonly(tables[0]),
        pre_firm=_readonly(tables[1]),
        post_tables=(_readonly(tables[2]), _readonly(tables[3])),
    )


def pre_utility(inst: MarketInstance, viewer: int, target: int) -> float:
    """``v_target + B_{viewer,target}``."""
    a, j, from_app = inst.split_pair(viewer, target)
    if from_app:
        return float(inst.pre_utility_app[a, j])
    return float(inst.pre_utility_firm[a, j])


def post_utility(inst: MarketInstance, viewer: int, target: int) -> float:
    """``v_target + B_{viewer,target} + A_{viewer,target}``."""
    a, j, from_app = inst.split_pair(viewer, target)
    if from_app:
        return float(inst.pre_utility_app[a, j] + inst.post_score_app(a, j))
    return float(inst.pre_utility_firm[a, j] + inst.post_score_firm(a, j))


def interim_utility(inst: MarketInstance, viewer: int, target: int, graph: "InterviewGraph") -> float:
    """Post-interview utility if the pair interviewed in ``graph``, else pre-interview utility."""
    if graph.n_applicants != inst.n_applicants or graph.n_firms != inst.n_firms:
        raise DomainError("graph and market have different agent sets")
    a, j, _ = inst.split_pair(viewer, target)
    if graph.has_edge(a, j):
        return post_utility(inst, viewer, target)
    return pre_utility(inst, viewer, target)
