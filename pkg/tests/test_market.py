from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from matchlab import streams
from matchlab.errors import ConfigError, DomainError
from matchlab.graph import InterviewGraph
from matchlab.market import (
    Mixture,
    MarketConfig,
    Normal,
    PointMass,
    Rademacher,
    TierSpec,
    Uniform,
    compute_q,
    dist_from_json,
    dist_to_json,
    instance_from_tables,
    interim_utility,
    largest_remainder,
    outweighs,
    p_nonneg,
    parse_dist,
    post_utility,
    pre_utility,
    sample_keyed,
    sample_market,
    sum_prob_gt,
    sum_quantile,
)


class TestDistributions:
    @pytest.mark.parametrize(
        "spec, expected",
        [
            ("uniform:-1,1", Uniform(-1.0, 1.0)),
            ("normal:0,1", Normal(0.0, 1.0)),
            ("pointmass:0", PointMass(0.0)),
            ("rademacher", Rademacher()),
        ],
    )
    def test_parse(self, spec, expected):
        assert parse_dist(spec) == expected
        assert parse_dist(spec).tag == spec

    @pytest.mark.parametrize("bad", ["uniform:1,1", "uniform:2,1", "normal:0,0", "normal:0,-1", "gamma:1", "uniform:a,b"])
    def test_parse_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_dist(bad)

    def test_mixture_weights_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            Mixture(((0.5, Normal(0, 1)), (0.4, Uniform(0, 1))))

    @pytest.mark.parametrize(
        "dist",
        [
            Uniform(-2.0, 3.0),
            Normal(1.0, 4.0),
            PointMass(0.25),
            Rademacher(),
            Mixture(((0.3, Normal(0, 1)), (0.7, Uniform(-1, 1)))),
        ],
    )
    def test_json_roundtrip(self, dist):
        assert dist_from_json(json.loads(json.dumps(dist_to_json(dist)))) == dist

    @pytest.mark.parametrize(
        "dist, ref",
        [
            (Uniform(-1.0, 1.0), stats.uniform(-1, 2)),
            (Normal(0.5, 4.0), stats.norm(0.5, 2.0)),
        ],
    )
    def test_cdf_and_quantile_match_scipy(self, dist, ref):
        for x in np.linspace(-3, 3, 13):
            assert dist.cdf(x) == pytest.approx(ref.cdf(x), abs=1e-12)
        for q in (0.01, 0.3, 0.5, 0.9, 0.999):
            assert dist.quantile(q) == pytest.approx(ref.ppf(q), abs=1e-9)

    def test_keyed_sampling_is_pure(self):
        d = Normal(0, 1)
        a, j = np.arange(5)[:, None], np.arange(7)[None, :]
        x = sample_keyed(d, 3, streams.ROLE_B_APP, a, j)
        y = sample_keyed(d, 3, streams.ROLE_B_APP, a, j)
        assert np.array_equal(x, y)
        z = sample_keyed(d, 3, streams.ROLE_B_FIRM, a, j)
        assert not np.array_equal(x, z)

    def test_keyed_sampling_law(self):
        a = np.arange(200_000)
        x = sample_keyed(Uniform(-1, 1), 11, streams.ROLE_A_APP, a, 0)
        assert stats.kstest(x, stats.uniform(-1, 2).cdf).pvalue > 1e-3
        y = sample_keyed(Normal(2, 9), 11, streams.ROLE_A_APP, a, 0)
        assert stats.kstest(y, stats.norm(2, 3).cdf).pvalue > 1e-3

    def test_rademacher_and_mixture_sampling(self):
        a = np.arange(100_000)
        r = sample_keyed(Rademacher(), 5, streams.ROLE_A_APP, a, 0)
        assert set(np.unique(r)) == {-1.0, 1.0}
        assert abs(r.mean()) < 0.02
        m = sample_keyed(Mixture(((0.25, PointMass(5.0)), (0.75, PointMass(-1.0)))), 5, streams.ROLE_A_APP, a, 0)
        assert abs((m == 5.0).mean() - 0.25) < 0.01


class TestSumLaw:
    @pytest.mark.parametrize(
        "x, y",
        [
            (Uniform(0, 1), Uniform(0, 1)),
            (Uniform(-1, 1), Uniform(0, 3)),
            (Normal(0, 1), Normal(1, 2)),
            (Normal(0, 1), Uniform(-1, 1)),
            (PointMass(0.5), Normal(0, 1)),
            (Rademacher(), Uniform(-1, 1)),
            (Mixture(((0.5, Normal(0, 1)), (0.5, PointMass(1.0)))), Uniform(-1, 1)),
        ],
    )
    def test_closed_form_matches_monte_carlo(self, x, y):
        # independent oracle: direct sampling with numpy's generator
        rng = np.random.default_rng(0)
        n = 400_000
        xs = x.from_uniform(rng.random(n)) if not isinstance(x, Mixture) else _mix_draw(x, rng, n)
        ys = y.from_uniform(rng.random(n))
        for t in (-1.5, -0.3, 0.0, 0.4, 1.2):
            closed = sum_prob_gt(x, y, t)
            assert closed is not None
            assert closed == pytest.approx(np.mean(xs + ys > t), abs=4e-3)

    def test_uniform_sum_quantile(self):
        # triangular law on [0, 2]: the q-quantile for q >= 1/2 is 2 - sqrt(2 (1 - q))
        for q in (0.5, 0.9, 0.99):
            assert sum_quantile(Uniform(0, 1), Uniform(0, 1), q) == pytest.approx(2 - np.sqrt(2 * (1 - q)), abs=1e-9)


def _mix_draw(mix, rng, n):
    comp = rng.choice(len(mix.components), size=n, p=[w for w, _ in mix.components])
    out = np.empty(n)
    for i, (_, d) in enumerate(mix.components):
        k = comp == i
        out[k] = d.from_uniform(rng.random(k.sum()))
    return out


class TestOutweighsAndQ:
    def test_pointmass_post_always_outweighed(self):
        assert outweighs(Normal(0, 1), PointMass(0.0), 3, 7)
        assert outweighs(Uniform(-1, 1), PointMass(0.0), 10, 1000)

    def test_bounded_post_normal_pre(self):
        assert outweighs(Normal(0, 1), Uniform(-1, 1), 40, 10**5)

    def test_equal_uniforms_do_not_outweigh(self):
        # sum quantile at 100/101 is 2 - sqrt(2/101) ~ 1.859, uniform quantile is 0.990
        assert not outweighs(Uniform(0, 1), Uniform(0, 1), 100, 100)

    def test_rejects_bad_ranks(self):
        with pytest.raises(DomainError):
            outweighs(Normal(0, 1), Uniform(-1, 1), 0, 3)

    @pytest.mark.parametrize(
        "pre, post, q",
        [
            (Uniform(0, 1), Uniform(0, 1), 0.5),
            (Uniform(-1, 1), PointMass(0.0), 0.5),
            (PointMass(0.0), PointMass(0.0), 1.0),
        ],
    )
    def test_compute_q(self, pre, post, q):
        assert compute_q(pre, post) == pytest.approx(q, abs=1e-12)

    def test_compute_q_needs_bounded_laws(self):
        with pytest.raises(DomainError):
            compute_q(Normal(0, 1), Uniform(-1, 1))

    @pytest.mark.parametrize("dist, p", [(Uniform(-1, 1), 0.5), (Normal(0, 1), 0.5), (PointMass(0.0), 1.0)])
    def test_p_nonneg(self, dist, p):
        assert p_nonneg(dist) == pytest.approx(p)


class TestTiers:
    @given(
        st.lists(st.integers(1, 50), min_size=1, max_size=6),
        st.integers(0, 5000),
    )
    def test_largest_remainder_sums_to_n(self, weights, n):
        fr = [w / sum(weights) for w in weights]
        sizes = largest_remainder(fr, n)
        assert sum(sizes) == n
        assert all(abs(s - f * n) < 1 for s, f in zip(sizes, fr))

    def test_tierspec_validation(self):
        with pytest.raises(ConfigError):
            TierSpec((0.5, 0.4), (1.0,))
        with pytest.raises(ConfigError):
            TierSpec((1.2, -0.2), (1.0,))


class TestInstance:
    def test_smallest_market(self):
        inst = sample_market(MarketConfig(1, 1, seed=7))
        assert inst.pre_app.shape == inst.pre_firm.shape == (1, 1)
        scores = [inst.pre_app[0, 0], inst.pre_firm[0, 0], inst.post_score_app(0, 0), inst.post_score_firm(0, 0)]
        assert all(np.isfinite(s) for s in scores)

    def test_sampling_is_deterministic(self):
        cfg = MarketConfig(30, 20, seed=123)
        x, y = sample_market(cfg), sample_market(cfg)
        assert np.array_equal(x.pre_app, y.pre_app)
        assert np.array_equal(x.pre_firm, y.pre_firm)
        a, j = np.meshgrid(np.arange(30), np.arange(20), indexing="ij")
        assert np.array_equal(x.post_score_app(a, j), y.post_score_app(a, j))

    def test_scores_do_not_depend_on_market_size(self):
        small = sample_market(MarketConfig(5, 5, seed=9))
        big = sample_market(MarketConfig(50, 40, seed=9))
        assert np.array_equal(small.pre_app, big.pre_app[:5, :5])

    def test_default_laws(self):
        cfg = MarketConfig(1000, 1000)
        assert cfg.pre_dist == Normal(0, 1) and cfg.post_dist == Uniform(-1, 1)

    def test_config_json_roundtrip(self):
        cfg = MarketConfig(
            12,
            9,
            pre_dist=Uniform(-1, 1),
            post_dist=Mixture(((0.5, PointMass(0)), (0.5, Normal(0, 1)))),
            tiers=TierSpec((0.5, 0.5), (0.25, 0.75)),
            seed=2**63 + 5,
        )
        assert MarketConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg

    def test_config_rejects_unknown_field(self):
        with pytest.raises(ConfigError):
            MarketConfig.from_json({"n_applicants": 2, "n_firms": 2, "colour": "red"})


class TestUtilities:
    def test_single_tier_pre_utility_is_score(self):
        inst = instance_from_tables([[0.3]], [[0.1]], [[0.0]], [[0.0]])
        assert pre_utility(inst, 0, 1) == pytest.approx(0.3)

    def test_tier_value_added(self):
        inst = instance_from_tables([[0.0, -0.1]], [[0.0, 0.0]], [[0, 0]], [[0, 0]], firm_value=[1.0, 2.0])
        assert pre_utility(inst, 0, 2) == pytest.approx(1.9)

    def test_direction_matters(self):
        inst = sample_market(MarketConfig(3, 3, seed=1))
        assert pre_utility(inst, 0, 3) != pre_utility(inst, 3, 0)

    def test_post_is_sum_of_components(self):
        inst = instance_from_tables([[0.3]], [[0.0]], [[-0.5]], [[0.0]])
        assert post_utility(inst, 0, 1) == pytest.approx(-0.2)

    def test_pointmass_post_equals_pre(self):
        inst = sample_market(MarketConfig(6, 5, post_dist=PointMass(0.0), seed=4))
        for a in range(6):
            for j in range(5):
                assert post_utility(inst, a, 6 + j) == pre_utility(inst, a, 6 + j)
                assert post_utility(inst, 6 + j, a) == pre_utility(inst, 6 + j, a)

    def test_interim_switches_on_edges(self):
        inst = sample_market(MarketConfig(3, 2, seed=8))
        g = InterviewGraph.from_edges(3, 2, [(0, 1), (2, 0)])
        for a in range(3):
            for j in range(2):
                for viewer, target in ((a, 3 + j), (3 + j, a)):
                    expected = post_utility if g.has_edge(a, j) else pre_utility
                    assert interim_utility(inst, viewer, target, g) == expected(inst, viewer, target)
        empty = InterviewGraph.empty(3, 2)
        assert interim_utility(inst, 0, 4, empty) == pre_utility(inst, 0, 4)

    def test_mixture_market_uses_type_stream(self):
        good, bad = Uniform(0.5, 1.0), Uniform(-1.0, -0.5)
        cfg = MarketConfig(400, 3, applicant_type_mixture=((0.5, good), (0.5, bad)), seed=3)
        inst = sample_market(cfg)
        a = np.arange(400)
        post = inst.post_score_firm(a, 1)
        types = inst.applicant_type
        assert set(np.unique(types)) == {0, 1}
        assert np.all(post[types == 0] >= 0.5)
        assert np.all(post[types == 1] <= -0.5)

    def test_same_side_pair_rejected(self):
        inst = sample_market(MarketConfig(2, 2))
        with pytest.raises(DomainError):
            pre_utility(inst, 0, 1)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**64 - 1), st.integers(1, 6), st.integers(1, 6))
    def test_pre_tables_match_scalar_accessors(self, seed, n_a, n_j):
        inst = sample_market(MarketConfig(n_a, n_j, seed=seed))
        for a in range(n_a):
            for j in range(n_j):
                assert inst.pre_utility_app[a, j] == pre_utility(inst, a, n_a + j)
                assert inst.pre_utility_firm[a, j] == pre_utility(inst, n_a + j, a)
