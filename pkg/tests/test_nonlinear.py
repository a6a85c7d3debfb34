import math

import numpy as np
import pytest

from modnls import dispersion as dsp, nonlinear as nl, spectral as sp

from conftest import band_limited_field


def _const_field(grid, value):
    return sp.SpectralField(grid, values=np.full(grid.shape, value, dtype=complex))


class TestSpecValidation:
    def test_empty_pattern_rejected(self):
        with pytest.raises(ValueError):
            nl.NonlinSpec(kind="power", pattern=())

    def test_bad_token_rejected(self):
        with pytest.raises(ValueError):
            nl.NonlinSpec(kind="power", pattern=("u", "vbar"))

    def test_rho_positive(self):
        with pytest.raises(ValueError):
            nl.NonlinSpec(kind="exponential", rho=-1.0)

    def test_json_round_trip(self):
        spec = nl.NonlinSpec.from_json(
            {"kind": "power", "pattern": "u,conj,u", "coeff": [-1.0, 0.0]})
        assert spec.pattern == ("u", "conj", "u") and spec.coeff == -1.0
        assert nl.NonlinSpec.from_json(spec.to_json()) == spec
        espec = nl.NonlinSpec.from_json(
            {"kind": "exponential", "lambda": [0.0, 1.0], "rho": 0.5, "cutoff": 6})
        assert espec.lam == 1j and espec.rho == 0.5 and espec.series_cutoff == 6
        assert nl.NonlinSpec.from_json(espec.to_json()) == espec

    def test_phase_invariant_detection(self):
        assert nl.NonlinSpec.cubic(-1.0).is_phase_invariant_power()
        assert nl.NonlinSpec.odd_power(2, 3.0).is_phase_invariant_power()
        assert not nl.NonlinSpec.cubic(1j).is_phase_invariant_power()
        quartic = nl.NonlinSpec(kind="power", pattern=("u", "conj", "u", "u"), coeff=-1.0)
        assert not quartic.is_phase_invariant_power()


class TestApplyPower:
    def test_constant_field(self, grid2d_small):
        # |a|^2 a with coefficient -1 at a = 1 + 2j: -(5)(1+2j)
        a = 1.0 + 2.0j
        out = nl.apply_power(nl.NonlinSpec.cubic(-1.0), _const_field(grid2d_small, a))
        assert np.allclose(out.values, -abs(a) ** 2 * a)

    def test_zero_field(self, grid2d_small):
        out = nl.apply_power(nl.NonlinSpec.cubic(-1.0), sp.SpectralField.zero(grid2d_small))
        assert sp.lp_norm(out, math.inf) == 0.0

    def test_frequency_tripling(self, grid1d):
        # (u, u, u) on a single mode triples the frequency
        f = sp.SpectralField.single_mode(grid1d, (8,))
        spec = nl.NonlinSpec(kind="power", pattern=("u",) * 3, coeff=1.0)
        out = nl.apply_power(spec, f)
        expected = sp.SpectralField.single_mode(grid1d, (24,))
        assert np.max(np.abs(out.values - expected.values)) < 1e-12

    def test_kind_mismatch(self, grid2d_small):
        with pytest.raises(ValueError):
            nl.apply_power(nl.NonlinSpec(kind="exponential", rho=1.0),
                           sp.SpectralField.zero(grid2d_small))

    def test_degree_homogeneity(self, grid2d_small):
        rng = np.random.default_rng(0)
        f = band_limited_field(grid2d_small, 1, rng)
        spec = nl.NonlinSpec(kind="power", pattern=("u", "conj", "u", "u"), coeff=-2.0)
        c = 0.7 - 0.3j
        a = nl.apply_power(spec, c * f).values
        b = nl.apply_power(spec, f).values
        assert np.allclose(np.abs(a), abs(c) ** 4 * np.abs(b), rtol=1e-12, atol=1e-300)

    def test_gauge_covariance(self, grid2d_small):
        rng = np.random.default_rng(1)
        f = band_limited_field(grid2d_small, 1, rng)
        spec = nl.NonlinSpec.odd_power(2, -1.0)  # |u|^4 u
        theta = 0.9
        a = nl.apply_power(spec, np.exp(1j * theta) * f).values
        b = np.exp(1j * theta) * nl.apply_power(spec, f).values
        assert np.allclose(a, b, rtol=1e-12, atol=1e-300)


class TestExponential:
    def test_zero_field(self, grid2d_small):
        spec = nl.NonlinSpec(kind="exponential", lam=2.0, rho=1.0)
        out = nl.apply_exponential(spec, sp.SpectralField.zero(grid2d_small))
        assert sp.lp_norm(out, math.inf) == 0.0

    def test_constant_scalar_identity(self, grid2d_small):
        a = 0.3 + 0.1j
        lam = 1.0 - 0.5j
        rho = 0.7
        spec = nl.NonlinSpec(kind="exponential", lam=lam, rho=rho)
        out = nl.apply_exponential(spec, _const_field(grid2d_small, a))
        expected = lam * (math.exp(rho * abs(a) ** 2) - 1.0) * a
        assert np.allclose(out.values, expected, rtol=1e-13)

    def test_first_order_truncation(self, grid2d_small):
        # M = 1 series is exactly lambda rho |u|^2 u
        rng = np.random.default_rng(2)
        f = band_limited_field(grid2d_small, 1, rng, amplitude=0.3)
        spec = nl.NonlinSpec(kind="exponential", lam=-1.0, rho=0.8, series_cutoff=1)
        series = nl.exponential_series(spec, f)
        direct = -0.8 * np.abs(f.values) ** 2 * f.values
        assert np.allclose(series.values, direct, rtol=1e-13, atol=1e-300)

    @pytest.mark.parametrize("cutoff", range(1, 13))
    def test_series_within_tail_bound(self, grid2d_small, cutoff):
        rng = np.random.default_rng(3 + cutoff)
        f = band_limited_field(grid2d_small, 1, rng, amplitude=0.5)
        spec = nl.NonlinSpec(kind="exponential", lam=0.5 + 0.2j, rho=1.0)
        closed = nl.apply_exponential(spec, f)
        series = nl.exponential_series(spec, f, cutoff=cutoff)
        dev = np.max(np.abs(closed.values - series.values))
        # at high cutoffs the analytic tail drops below the roundoff of
        # comparing two float evaluation paths; allow that floor explicitly
        sup = np.max(np.abs(f.values))
        floor = 16 * np.finfo(float).eps * abs(spec.lam) * sup * max(1.0, spec.rho * sup**2)
        assert dev <= nl.exponential_tail_bound(spec, f, cutoff=cutoff) + floor

    def test_overflow_rejected(self, grid2d_small):
        spec = nl.NonlinSpec(kind="exponential", lam=1.0, rho=1.0)
        with pytest.raises(ValueError):
            nl.apply_exponential(spec, _const_field(grid2d_small, 30.0))

    def test_kind_mismatch(self, grid2d_small):
        with pytest.raises(ValueError):
            nl.apply_exponential(nl.NonlinSpec.cubic(), sp.SpectralField.zero(grid2d_small))


class TestLipschitzWitness:
    def _trajectories(self, grid, rng, times, amplitude=1.0):
        coeffs = dsp.EquationCoeffs(1.0, 0.0, 1.0)
        u0 = band_limited_field(grid, 1, rng, amplitude=amplitude)
        return dsp.propagate_trajectory(coeffs, times, u0)

    def test_identical_arguments_vanish(self, grid2d, partition2d):
        rng = np.random.default_rng(4)
        times = np.linspace(0, 1, 5)
        u = self._trajectories(grid2d, rng, times)
        spec = nl.NonlinSpec(kind="power", pattern=("u", "conj", "u", "u"), coeff=-1.0)
        exps = nl.LipschitzExponents(s=0.0, q=1, r_tilde=1, p_tilde=2, l=3, m=3)
        lhs, rhs = nl.power_lipschitz_witness(u, u, spec, exps, partition2d)
        assert lhs == 0.0

    def test_v_zero_reduction(self, grid2d, partition2d):
        rng = np.random.default_rng(5)
        times = np.linspace(0, 1, 5)
        u = self._trajectories(grid2d, rng, times, amplitude=0.5)
        zero = sp.Trajectory(grid2d, times, np.zeros_like(u.spectra))
        spec = nl.NonlinSpec(kind="power", pattern=("u", "conj"), coeff=1.0)  # m = 1
        exps = nl.LipschitzExponents(s=0.0, q=1, r_tilde=1, p_tilde=2, l=1, m=1)
        lhs, rhs = nl.power_lipschitz_witness(u, zero, spec, exps, partition2d)
        assert rhs > 0 and lhs / rhs < 10.0

    def test_scalar_brute_force_bound(self):
        # |a^{m+1} - b^{m+1}| <= (m+1) |a - b| (|a|^m + |b|^m) on a complex mesh
        from modnls.harness import scalar_lipschitz_ratio
        for m in (1, 2, 3, 5):
            assert scalar_lipschitz_ratio(m) <= m + 1 + 1e-9


class TestAliasingResidual:
    def test_band_limited_input_clean(self, grid2d_small):
        # quartic of a band-1 field spreads to band 4 < (2/3) Nyquist at M=4
        rng = np.random.default_rng(7)
        f = band_limited_field(grid2d_small, 1, rng, amplitude=0.2)
        spec = nl.NonlinSpec(kind="power", pattern=("u", "conj", "u", "u"), coeff=-1.0)
        assert nl.aliasing_residual(spec, f) < 1e-12

    def test_wide_input_flags_aliasing(self, grid2d_small):
        # cubing a field that fills most of the lattice wraps past Nyquist
        rng = np.random.default_rng(8)
        band = (grid2d_small.n // 2 - 2) // grid2d_small.M
        f = band_limited_field(grid2d_small, band, rng, amplitude=1.0)
        spec = nl.NonlinSpec(kind="power", pattern=("u",) * 3, coeff=1.0)
        assert nl.aliasing_residual(spec, f) > 1e-3

    def test_zero_field(self, grid2d_small):
        spec = nl.NonlinSpec.cubic()
        assert nl.aliasing_residual(spec, sp.SpectralField.zero(grid2d_small)) == 0.0


class TestTrajectoryApplication:
    def test_matches_per_sample(self, grid2d_small):
        rng = np.random.default_rng(6)
        coeffs = dsp.EquationCoeffs(1.0, 0.0, 1.0)
        u0 = band_limited_field(grid2d_small, 1, rng, amplitude=0.4)
        times = np.linspace(0, 1, 4)
        traj = dsp.propagate_trajectory(coeffs, times, u0)
        spec = nl.NonlinSpec.cubic(-1.0)
        out = nl.apply_to_trajectory(spec, traj)
        for j in range(4):
            direct = nl.apply_power(spec, traj.field(j))
            scale = np.max(np.abs(direct.values))
            assert np.max(np.abs(out.values(j) - direct.values)) < 1e-13 * scale
