import math

import numpy as np
import pytest

from heatgauss import (
    ConditioningError,
    ConsistencyError,
    DomainError,
    HeatKernelEvaluator,
    OperatorSpec,
    SpectralDecomposition,
    TwistSpec,
    TwistedOperator,
    appendix_b_identities,
    assemble_form,
    constant_coefficient,
    evolved_twisted_form_check,
    form_perturbation_bound_fit,
    numerical_range_sector,
    per_lambda,
    polyharmonic_spec,
    sector_samples,
    sector_shift_search,
    twisted_kernel,
    twisted_semigroup_norm_fit,
)
from heatgauss.core import Grid1D, MultiIndex
from heatgauss.twist import leibniz_expand, mixed_norm_bound_fit


def make_twist(grid, lam, a=1.0):
    return TwistSpec(grid=grid, x0=grid.length / 2.0, a=a, lam=lam)


class TestTwistSpec:
    def test_psi_affine(self):
        g = Grid1D(length=2.0, n_interior=7)
        tw = make_twist(g, 1.5)
        assert tw.psi(1.0) == pytest.approx(0.0)
        assert tw.psi(2.0) == pytest.approx(1.0)

    def test_direction_must_be_unit(self):
        g = Grid1D(length=1.0, n_interior=4)
        with pytest.raises(DomainError):
            TwistSpec(grid=g, x0=0.5, a=2.0, lam=1.0)

    def test_cap_on_lambda(self):
        g = Grid1D(length=4.0, n_interior=4)
        with pytest.raises(ConditioningError):
            make_twist(g, 11.0)  # |lam| L = 44 > 40

    def test_inverse_weights(self):
        g = Grid1D(length=1.0, n_interior=5)
        tw = make_twist(g, 0.7)
        assert np.allclose(tw.weights() * tw.weights(inverse=True), 1.0)


class TestSimilarity:
    def test_spectrum_invariant_under_twist(self, laplace200):
        _, d = laplace200
        tw = make_twist(d.grid, 1.0)
        top = TwistedOperator(base=d, twist=tw)
        spec = np.sort(np.linalg.eigvals(top.matrix()).real)
        assert np.max(np.abs(spec - d.eigenvalues)) < 1e-8 * d.eigenvalues[-1]

    def test_twisted_kernel_identity(self, laplace200):
        _, d = laplace200
        ev = HeatKernelEvaluator(d)
        tw = make_twist(d.grid, 1.0)
        # cross_check inside compares the direct formula with the similarity route
        val = twisted_kernel(ev, tw, 0.2, 40, 150, cross_check=True)
        assert math.isfinite(val)

    def test_zero_twist_is_plain_kernel(self, laplace200):
        from heatgauss import kernel_eval

        _, d = laplace200
        ev = HeatKernelEvaluator(d)
        tw = make_twist(d.grid, 0.0)
        assert twisted_kernel(ev, tw, 0.3, 10, 20) == pytest.approx(kernel_eval(ev, 0.3, 10, 20))

    def test_appendix_b(self, laplace200):
        _, d = laplace200
        tw = make_twist(d.grid, 1.5)
        out = appendix_b_identities(d, tw, complex(-2.0, 3.0))
        assert out["ok"]
        assert out["resolvent_rel_err"] <= 1e-8
        assert out["spectrum_rel_err"] <= 1e-8

    def test_appendix_b_near_spectrum_rejected(self, laplace200):
        _, d = laplace200
        tw = make_twist(d.grid, 0.5)
        with pytest.raises(ConditioningError):
            appendix_b_identities(d, tw, complex(d.eigenvalues[0], 0.0))


class TestLeibniz:
    def test_continuum_expansion_first_order(self):
        terms = leibniz_expand(MultiIndex((1,)), 2.0, 1.0)
        assert [(t[0].components, t[1]) for t in terms] == [((0,), 2.0), ((1,), 1.0)]

    def test_dual_path_constant_coefficients(self, laplace200):
        form, d = laplace200
        rng = np.random.default_rng(7)
        f = rng.standard_normal(d.grid.n_interior)
        tw = make_twist(d.grid, 1.2)
        # per_lambda raises internally when the two routes disagree
        val = per_lambda(form, tw, f, rel_tol=1e-8)
        assert math.isfinite(val)

    def test_dual_path_variable_coefficients(self):
        spec = OperatorSpec(
            m=2,
            coefficients={
                (2, 2): lambda x: 1.0 + 0.5 * np.sin(2 * np.pi * x),
                (1, 1): lambda x: 2.0 + x,
                (0, 0): constant_coefficient(1.0),
            },
        )
        g = Grid1D(length=1.0, n_interior=40)
        form = assemble_form(spec, g)
        rng = np.random.default_rng(3)
        f = rng.standard_normal(40)
        tw = make_twist(g, 2.0, a=-1.0)
        assert math.isfinite(per_lambda(form, tw, f, rel_tol=1e-8))

    def test_small_lambda_quadratic_scaling(self, laplace200):
        # for m = 1, per(lam) ~ -lam^2 ||f||^2 in the continuum limit
        form, d = laplace200
        f = d.eigenvectors[:, 0]
        norm2 = d.grid.norm(f) ** 2
        vals = [per_lambda(form, make_twist(d.grid, lam), f) for lam in (0.01, 0.02)]
        assert vals[1] / vals[0] == pytest.approx(4.0, rel=1e-3)
        assert vals[0] == pytest.approx(-0.01**2 * norm2, rel=5e-3)

    def test_zero_function_rejected(self, laplace200):
        form, d = laplace200
        with pytest.raises(DomainError):
            per_lambda(form, make_twist(d.grid, 1.0), np.zeros(d.grid.n_interior))


class TestPerturbationFit:
    def test_fit_and_holdout(self, laplace200, rng):
        form, d = laplace200
        f_train = np.vstack([d.eigenvectors[:, [0, 50, 199]].T, rng.standard_normal((6, 200))])
        f_holdout = rng.standard_normal((6, 200))
        out = form_perturbation_bound_fit(
            form, d, d.grid.length / 2.0, 1.0,
            lam_grid=[0.5, 1.0, 2.0],
            theta_grid=[0.1, 1.0],
            eps_grid=[0.25, 0.5, 1.0],
            f_train=f_train,
            f_holdout=f_holdout,
        )
        assert out["violations"] == 0
        assert out["c1"] > 0


class TestSector:
    def test_untwisted_is_sectorial_with_zero_shift(self, laplace200):
        _, d = laplace200
        top = TwistedOperator(base=d, twist=make_twist(d.grid, 0.0))
        samples = sector_samples(d, seed=1, count=50)
        assert sector_shift_search(top, 0.5, samples) == 0.0

    def test_twisted_needs_finite_shift(self, laplace200):
        _, d = laplace200
        tw = make_twist(d.grid, 1.0)
        top = TwistedOperator(base=d, twist=tw)
        samples = sector_samples(d, seed=1, count=200)
        c = sector_shift_search(top, 0.5, samples)
        assert 0.0 < c < 1e3
        unit = (1.0 + 0.5) * (1.0 + d.gap) ** 2 * tw.lam**2
        angle, violations = numerical_range_sector(top, 0.5, c * unit, samples)
        assert violations == []
        assert angle <= math.atan(2.0) + 1e-12

    def test_invalid_p(self, laplace200):
        _, d = laplace200
        top = TwistedOperator(base=d, twist=make_twist(d.grid, 0.5))
        with pytest.raises(DomainError):
            sector_shift_search(top, 1.5, sector_samples(d, count=5))


class TestSemigroupFits:
    def test_zero_twist_contraction(self, laplace200):
        _, d = laplace200
        out = twisted_semigroup_norm_fit(d, make_twist(d.grid, 0.0), np.geomspace(0.05, 2.0, 6))
        assert out["c"] == 0.0
        assert all(nrm <= 1.0 + 1e-10 for _, nrm in out["norms"])

    def test_twisted_growth_constant(self, laplace200):
        _, d = laplace200
        out = twisted_semigroup_norm_fit(d, make_twist(d.grid, 1.0), np.geomspace(0.05, 2.0, 8))
        assert 0.0 < out["c"] < 10.0

    def test_mixed_norm_fit(self, laplace200):
        _, d = laplace200
        tw = make_twist(d.grid, 1.0)
        ts = np.geomspace(0.05, 2.0, 6)
        c = twisted_semigroup_norm_fit(d, tw, ts)["c"]
        out = mixed_norm_bound_fit(d, tw, ts, 0.5, 1.0, c)
        assert out["c2"] > 0.0

    def test_evolved_twisted_form(self, laplace200, rng):
        form, d = laplace200
        tw = make_twist(d.grid, 1.0)
        f_train = np.vstack([d.eigenvectors[:, [0, 199]].T, rng.standard_normal((5, 200))])
        f_holdout = rng.standard_normal((5, 200))
        out = evolved_twisted_form_check(
            d, form, tw, 0.5, np.geomspace(0.05, 2.0, 6), f_train, f_holdout
        )
        assert out["violations"] == 0
        assert out["c1"] > 0 and out["c2"] >= 0
