import math
import warnings

import numpy as np
import pytest
from scipy import stats

from ouvol.sde import (
    ContractionWarning,
    GridSpec,
    NoiseStream,
    OUParams,
    Path,
    coupled_values,
    deterministic_path,
    em_values,
    exact_values,
    ou_exact_moments,
    simulate_em_path,
    simulate_exact_path,
    subsample_path,
)

OU = OUParams(alpha=1.0, k=0.1, y0=0.1)


class TestTypes:
    @pytest.mark.parametrize("alpha,k", [(0.0, 0.1), (-1.0, 0.1), (1.0, -0.1), (math.nan, 0.1)])
    def test_ou_params_rejects(self, alpha, k):
        with pytest.raises(ValueError):
            OUParams(alpha, k, 0.1)

    def test_k_zero_allowed(self):
        assert OUParams(1.0, 0.0, 0.1).k == 0.0

    @pytest.mark.parametrize("T,m", [(0.0, 10), (1.0, 0), (1.0, 2.5), (-1.0, 3)])
    def test_grid_rejects(self, T, m):
        with pytest.raises(ValueError):
            GridSpec(T, m)

    @pytest.mark.parametrize("T,dt,m", [(0.25, 0.001, 250), (0.5, 0.001, 500), (1.0, 1e-4, 10000), (1.0, 0.3, 3)])
    def test_grid_from_step_rounds(self, T, dt, m):
        g = GridSpec.from_step(T, dt)
        assert g.m == m
        assert g.dt * g.m == pytest.approx(T, rel=1e-15)

    def test_path_length_checked(self):
        with pytest.raises(ValueError):
            Path(GridSpec(1.0, 4), np.zeros(4), "euler")

    def test_path_is_immutable(self):
        p = deterministic_path(OU, GridSpec(1.0, 4))
        with pytest.raises(ValueError):
            p.values[0] = 1.0

    @pytest.mark.parametrize("seed", [-1, 2**64, 1.5])
    def test_noise_stream_seed_range(self, seed):
        with pytest.raises(ValueError):
            NoiseStream(seed, 0)


class TestNoiseStream:
    def test_reproducible(self):
        a = NoiseStream(42, 7).standard_normals(1000)
        b = NoiseStream(42, 7).standard_normals(1000)
        assert np.array_equal(a, b)

    def test_prefix_property(self):
        long = NoiseStream(42, 7).standard_normals(1000)
        short = NoiseStream(42, 7).standard_normals(10)
        assert np.array_equal(long[:10], short)

    def test_substreams_differ(self):
        a = NoiseStream(42, 0).standard_normals(100)
        b = NoiseStream(42, 1).standard_normals(100)
        c = NoiseStream(43, 0).standard_normals(100)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_uniforms_open_interval(self):
        u = NoiseStream(1, 2).uniforms(100_000)
        assert u.min() > 0 and u.max() < 1

    def test_normals_are_normal(self):
        z = NoiseStream(9, 3).standard_normals(100_000)
        assert stats.kstest(z, "norm").pvalue > 0.01

    def test_inversion(self):
        ns = NoiseStream(5, 5)
        assert np.array_equal(ns.standard_normals(50), stats.norm.ppf(ns.uniforms(50)))

    def test_order_independent_batches(self):
        g = GridSpec(1.0, 50)
        batch = em_values(OU, g, 11, [3, 1, 2])
        for row, sid in zip(batch, [3, 1, 2]):
            single = simulate_em_path(OU, g, NoiseStream(11, sid)).values
            assert np.array_equal(row, single)


class TestMoments:
    def test_initial(self):
        assert ou_exact_moments(OU, 0.0) == (0.1, 0.0)

    def test_stationary_limit(self):
        _, var = ou_exact_moments(OUParams(1.0, 1.0, 0.0), 50.0)
        assert var == pytest.approx(0.5, abs=1e-15)

    def test_closed_form_t1(self):
        mean, var = ou_exact_moments(OU, 1.0)
        assert mean == pytest.approx(0.0367879, abs=5e-8)
        assert var == pytest.approx(0.0043233, abs=5e-8)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            ou_exact_moments(OU, -0.1)

    def test_exact_draws_match(self):
        # one exact transition step over [0, 1] per draw
        n = 100_000
        y = exact_values(OU, GridSpec(1.0, 1), 2024, range(n))[:, -1]
        mean, var = ou_exact_moments(OU, 1.0)
        se_mean = math.sqrt(var / n)
        se_var = var * math.sqrt(2.0 / (n - 1))
        assert abs(y.mean() - mean) < 4 * se_mean
        assert abs(y.var(ddof=1) - var) < 4 * se_var


class TestEuler:
    def test_single_step_noiseless(self):
        p = simulate_em_path(OUParams(1.0, 0.0, 0.1), GridSpec(1.0, 1), NoiseStream(0, 0))
        assert list(p.values) == [0.1, 0.0]

    def test_noiseless_matches_product(self):
        p = simulate_em_path(OUParams(1.0, 0.0, 0.1), GridSpec(1.0, 1000), NoiseStream(0, 0))
        assert p.values[-1] == pytest.approx(0.1 * 0.999**1000, rel=1e-13)
        assert p.values[-1] == pytest.approx(0.0367695, abs=5e-8)
        # first-order bias against the exact solution
        assert 0.1 * math.exp(-1) - p.values[-1] == pytest.approx(0.1 * math.exp(-1) / 2000, rel=0.01)

    def test_matches_explicit_loop_bitwise(self):
        g = GridSpec(0.7, 300)
        ns = NoiseStream(77, 4)
        xi = ns.standard_normals(g.m)
        y = [OU.y0]
        for l in range(g.m):
            y.append((1.0 - OU.alpha * g.dt) * y[-1] + OU.k * (math.sqrt(g.dt) * xi[l]))
        assert np.array_equal(simulate_em_path(OU, g, ns).values, np.array(y))

    def test_noiseless_recursion_exact(self):
        p = OUParams(3.0, 0.0, -0.2)
        g = GridSpec(1.0, 64)
        values = simulate_em_path(p, g, NoiseStream(1, 1)).values
        phi = 1.0 - 3.0 * g.dt
        for l in range(g.m):
            assert values[l + 1] == phi * values[l]

    def test_terminal_mean(self):
        n = 10_000
        y = em_values(OU, GridSpec(1.0, 100), 31, range(n))[:, -1]
        mean, var = ou_exact_moments(OU, 1.0)
        assert abs(y.mean() - mean) < 4 * math.sqrt(var / n)

    def test_contraction_warning(self):
        with pytest.warns(ContractionWarning):
            simulate_em_path(OUParams(100.0, 0.1, 0.1), GridSpec(1.0, 100), NoiseStream(0, 0))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            simulate_em_path(OUParams(100.0, 0.1, 0.1), GridSpec(1.0, 1000), NoiseStream(0, 0))

    def test_scheme_tag_and_start(self):
        p = simulate_em_path(OU, GridSpec(1.0, 10), NoiseStream(0, 0))
        assert p.scheme == "euler" and p.values[0] == OU.y0 and len(p) == 11


class TestExact:
    def test_noiseless_is_exponential(self):
        p = OUParams(2.0, 0.0, 0.1)
        g = GridSpec(1.0, 200)
        values = simulate_exact_path(p, g, NoiseStream(0, 0)).values
        np.testing.assert_allclose(values, 0.1 * np.exp(-2.0 * g.times), rtol=1e-13, atol=0)

    def test_no_discretisation_bias(self):
        n = 10_000
        coarse = exact_values(OU, GridSpec(1.0, 1), 100, range(n))[:, -1]
        fine = exact_values(OU, GridSpec(1.0, 1000), 200, range(n))[:, -1]
        assert stats.ks_2samp(coarse, fine).pvalue > 0.01

    def test_shares_normals_with_euler(self):
        g = GridSpec(1.0, 40)
        em, ex = coupled_values(OU, g, 3, [0])
        assert np.array_equal(em[0], simulate_em_path(OU, g, NoiseStream(3, 0)).values)
        assert np.array_equal(ex[0], simulate_exact_path(OU, g, NoiseStream(3, 0)).values)
        # same noise: the two paths stay close
        assert np.max(np.abs(em - ex)) < 0.01


class TestDeterministic:
    def test_values(self):
        p = deterministic_path(OU, GridSpec(1.0, 4))
        expected = [0.1, 0.1 * math.exp(-0.25), 0.1 * math.exp(-0.5), 0.1 * math.exp(-0.75), 0.1 * math.exp(-1)]
        np.testing.assert_allclose(p.values, expected, rtol=1e-15)
        assert p.scheme == "deterministic"

    def test_fast_decay(self):
        p = deterministic_path(OUParams(1e4, 0.0, 0.1), GridSpec(1.0, 100))
        assert np.all(p.values[1:] < 1e-40)

    def test_euler_bias_is_first_order(self):
        p = OUParams(1.0, 0.0, 0.1)
        gaps = []
        for m in (100, 1000):
            g = GridSpec(1.0, m)
            em = simulate_em_path(p, g, NoiseStream(0, 0)).values
            gaps.append(np.max(np.abs(em - deterministic_path(p, g).values)))
        assert gaps[0] / gaps[1] == pytest.approx(10.0, rel=0.02)


class TestSubsample:
    def test_identity(self):
        p = simulate_em_path(OU, GridSpec(1.0, 100), NoiseStream(1, 0))
        q = subsample_path(p, 1)
        assert np.array_equal(p.values, q.values) and q.grid == p.grid

    def test_every_tenth(self):
        p = simulate_em_path(OU, GridSpec(1.0, 1000), NoiseStream(1, 0))
        q = subsample_path(p, 10)
        assert len(q) == 101 and q.grid.m == 100
        assert np.array_equal(q.values, p.values[::10])
        assert q.scheme == p.scheme

    @pytest.mark.parametrize("factor", [3, 0, 7])
    def test_rejects_non_divisors(self, factor):
        p = deterministic_path(OU, GridSpec(1.0, 1000))
        with pytest.raises(ValueError):
            subsample_path(p, factor)
