import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from matlaplace import bootstrap
from matlaplace.bootstrap import (
    bootstrap_pvalue,
    critical_value,
    pooled_resample,
    replicate_pairs,
    warp_speed_power,
)
from matlaplace.errors import EmptyList, InvalidAlpha, InvalidReps, PivotFailure, ReplicationError
from matlaplace.laplace import NcwParams
from matlaplace.sample import MatrixSample
from matlaplace.samplers import CMU, IW, W, RngStream, make_rng

from conftest import psd_samples, random_sample

P2 = NcwParams.isotropic(2, 1.0)
W2 = W(2, 2.5)


class TestPooledResample:
    def test_identical_pool(self):
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        x = MatrixSample(np.stack([a] * 3))
        y = MatrixSample(np.stack([a] * 4))
        rx, ry = pooled_resample(x, y, make_rng(1))
        assert rx == x and ry == y

    @pytest.mark.parametrize("n1,n2", [(1, 1), (3, 8), (10, 2)])
    def test_sizes(self, rng, n1, n2):
        x = MatrixSample(random_sample(rng, n1, 2))
        y = MatrixSample(random_sample(rng, n2, 2))
        rx, ry = pooled_resample(x, y, make_rng(2))
        assert (len(rx), len(ry)) == (n1, n2)

    def test_replay(self, rng):
        x = MatrixSample(random_sample(rng, 5, 2))
        y = MatrixSample(random_sample(rng, 6, 2))
        assert pooled_resample(x, y, make_rng(3)) == pooled_resample(x, y, make_rng(3))

    def test_draws_come_from_pool(self, rng):
        x = MatrixSample(random_sample(rng, 5, 2))
        y = MatrixSample(random_sample(rng, 6, 2))
        pool = {m.tobytes() for m in np.concatenate([x.data, y.data])}
        rx, ry = pooled_resample(x, y, make_rng(4))
        assert all(m.tobytes() in pool for m in np.concatenate([rx.data, ry.data]))


class TestCriticalValue:
    def test_rank(self):
        assert critical_value(list(range(1, 101)), 0.05) == 95

    def test_unsorted_input(self):
        vals = list(range(1, 101))
        np.random.default_rng(0).shuffle(vals)
        assert critical_value(vals, 0.05) == 95

    def test_all_equal(self):
        assert critical_value([0.3] * 17, 0.05) == 0.3

    def test_normal_quantile(self):
        z = make_rng(5).standard_normal(10_000)
        assert critical_value(z, 0.05) == pytest.approx(1.645, abs=0.05)

    @pytest.mark.parametrize("n,alpha,rank", [(1, 0.05, 1), (20, 0.05, 19), (2000, 0.05, 1900), (7, 0.5, 4), (10, 0.99, 1)])
    def test_rank_arithmetic(self, n, alpha, rank):
        assert critical_value(np.arange(1, n + 1, dtype=float), alpha) == rank

    def test_empty(self):
        with pytest.raises(EmptyList):
            critical_value([], 0.05)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5])
    def test_bad_alpha(self, alpha):
        with pytest.raises(InvalidAlpha):
            critical_value([1.0, 2.0], alpha)


class TestWarpSpeed:
    def test_structure_and_invariants(self):
        run = warp_speed_power(W2, CMU(2), 10, 12, P2, 200, 0.05, 3)
        assert run.observed.shape == run.bootstrap.shape == (200,)
        assert run.c_alpha == critical_value(run.bootstrap, 0.05)
        assert run.rejection_rate == run.rejections / 200
        assert 0.0 <= run.rejection_rate <= 1.0

    def test_replay_bit_exact(self):
        a = warp_speed_power(W2, IW(2, 2.5), 8, 8, P2, 100, 0.05, 11)
        b = warp_speed_power(W2, IW(2, 2.5), 8, 8, P2, 100, 0.05, RngStream(11))
        assert np.array_equal(a.observed, b.observed) and np.array_equal(a.bootstrap, b.bootstrap)

    def test_worker_count_invariant(self):
        a = replicate_pairs(W2, CMU(2), 8, 9, P2, 60, RngStream(4), workers=1)
        b = replicate_pairs(W2, CMU(2), 8, 9, P2, 60, RngStream(4), workers=3)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_replication_order_invariant(self):
        # replication 17 computed alone equals replication 17 of the full run
        obs, boot = replicate_pairs(W2, CMU(2), 6, 6, P2, 30, RngStream(4))
        single = bootstrap._run_chunk((W2, CMU(2), 6, 6, P2, RngStream(4), [17]))[0]
        assert (obs[17], boot[17]) == single

    def test_seeds_agree_within_mc_error(self):
        n = 2000
        a = warp_speed_power(W2, W2, 20, 20, P2, n, 0.05, 1).rejection_rate
        b = warp_speed_power(W2, W2, 20, 20, P2, n, 0.05, 2).rejection_rate
        assert abs(a - b) < 3 * math.sqrt(0.05 * 0.95 / n)

    def test_strong_alternative(self):
        assert warp_speed_power(W2, CMU(2), 20, 20, P2, 500, 0.05, 6).rejection_rate >= 0.98

    def test_failure_carries_index(self, monkeypatch):
        calls = {"n": 0}
        real = bootstrap.sample_scenario

        def flaky(spec, rng, size=None):
            calls["n"] += 1
            if calls["n"] == 5:
                raise PivotFailure("synthetic")
            return real(spec, rng, size)

        monkeypatch.setattr(bootstrap, "sample_scenario", flaky)
        with pytest.raises(ReplicationError) as info:
            warp_speed_power(W2, W2, 5, 5, P2, 10, 0.05, 0)
        assert info.value.index == 2
        assert isinstance(info.value.cause, PivotFailure)

    def test_bad_reps(self):
        with pytest.raises(InvalidReps):
            warp_speed_power(W2, W2, 5, 5, P2, 0, 0.05, 0)

    def test_bad_alpha(self):
        with pytest.raises(InvalidAlpha):
            warp_speed_power(W2, W2, 5, 5, P2, 10, 1.0, 0)


class TestPValue:
    def test_identical_samples(self, rng):
        x = MatrixSample(random_sample(rng, 12, 2))
        res = bootstrap_pvalue(x, x, P2, 999, 1)
        assert res.observed == 0.0
        assert res.p_value == 1.0

    def test_zero_reps(self, rng):
        x = MatrixSample(random_sample(rng, 3, 2))
        with pytest.raises(InvalidReps):
            bootstrap_pvalue(x, x, P2, 0, 1)

    def test_separated_samples(self):
        x = MatrixSample(np.stack([0.1 * np.eye(2)] * 20))
        y = MatrixSample(np.stack([10.0 * np.eye(2)] * 20))
        assert bootstrap_pvalue(x, y, P2, 999, 2).p_value <= 0.01

    def test_estimator_formula(self, rng):
        x = MatrixSample(random_sample(rng, 6, 2))
        y = MatrixSample(random_sample(rng, 7, 2, 1.3))
        res = bootstrap_pvalue(x, y, P2, 200, 3, keep_replicates=True)
        assert res.replicates.shape == (200,)
        assert res.p_value == (1 + np.sum(res.replicates >= res.observed)) / 201

    def test_replay(self, rng):
        x = MatrixSample(random_sample(rng, 6, 2))
        y = MatrixSample(random_sample(rng, 7, 2))
        assert bootstrap_pvalue(x, y, P2, 100, 9) == bootstrap_pvalue(x, y, P2, 100, 9)

    @given(psd_samples(4, 2), psd_samples(5, 2), st.integers(1, 50), st.integers(0, 1000))
    def test_range(self, x, y, b, seed):
        p = bootstrap_pvalue(MatrixSample(x), MatrixSample(y), P2, b, seed).p_value
        assert 1 / (b + 1) <= p <= 1.0
