import numpy as np
import pytest

from manifold_svrg.linalg import qr_positive, sym
from manifold_svrg.manifold import (MetricParams, StiefelPoint, TangentSpace,
                                    TangentVector, d_rho, d_rho_array,
                                    feasibility_error, gamma_of_rho, inner_x,
                                    nu_of_rho, riemannian_grad, tangent_project,
                                    tangent_project_array)
from manifold_svrg.problems import PcaInstance, pca_generate

rng = np.random.default_rng(7)


def random_point(d=8, r=3):
    return StiefelPoint(qr_positive(rng.standard_normal((d, r)))[0])


class TestPointAndTangentTypes:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            StiefelPoint(rng.standard_normal((6, 2)))

    def test_rejects_wide(self):
        with pytest.raises(ValueError):
            StiefelPoint(np.eye(3)[:2])

    def test_tangent_invariant_enforced(self):
        X = random_point()
        with pytest.raises(ValueError):
            TangentVector(rng.standard_normal(X.shape), X)

    def test_horizontal_stricter_than_tangent(self):
        X = random_point()
        E = tangent_project_array(X.X, rng.standard_normal(X.shape),
                                  TangentSpace.STIEFEL)
        TangentVector(E, X, TangentSpace.STIEFEL)
        if np.linalg.norm(X.X.T @ E) > 1e-8:
            with pytest.raises(ValueError):
                TangentVector(E, X, TangentSpace.GRASSMANN)


def test_nu_of_rho():
    assert nu_of_rho(0.0) == 1.0
    assert nu_of_rho(0.25) == 1.0
    assert nu_of_rho(1.0) == 0.25
    assert nu_of_rho(0.1) == 1.0
    with pytest.raises(ValueError):
        nu_of_rho(-0.5)


def test_metric_params_invariant():
    for rho in (0.0, 0.125, 0.25, 1.0, 5.0):
        mp = MetricParams(rho)
        assert 0.0 < mp.nu <= 1.0 <= mp.gamma
        if rho == 0.0 or rho >= 0.25:
            assert mp.gamma == 1.0


class TestDRho:
    def test_symmetric_cancellation(self):
        X = random_point()
        S = sym(rng.standard_normal((3, 3)))
        Y = X.X @ S + (np.eye(8) - X.X @ X.X.T) @ rng.standard_normal((8, 3))
        for rho in (0.0, 0.25, 1.0):
            got = d_rho_array(X.X, Y, rho)
            want = Y - X.X @ (X.X.T @ Y)
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_hand_computed_2x1(self):
        X = StiefelPoint(np.array([[1.0], [0.0]]))
        Y = np.array([[2.0], [3.0]])
        got = d_rho(X, Y, 0.25)
        np.testing.assert_allclose(got.E, [[0.0], [3.0]], atol=1e-15)

    def test_quarter_rho_is_tangent_projection(self):
        X = random_point()
        Y = rng.standard_normal(X.shape)
        got = d_rho_array(X.X, Y, 0.25)
        want = Y - X.X @ sym(X.X.T @ Y)
        np.testing.assert_allclose(got, want, atol=1e-13)

    def test_output_space_invariants(self):
        X = random_point()
        for rho in (0.0, 0.125, 0.25, 2.0):
            Y = rng.standard_normal(X.shape)
            v = d_rho(X, Y, rho)
            expect = TangentSpace.GRASSMANN if rho == 0.0 else TangentSpace.STIEFEL
            assert v.space is expect  # construction re-validates the invariant


class TestRiemannianGrad:
    def test_zero_gradient(self):
        X = random_point()
        assert riemannian_grad(X, np.zeros(X.shape), 0.5).norm() == 0.0

    def test_pca_stationary_at_eigenspace(self):
        inst = PcaInstance(pca_generate(12, 30, seed=5), r=3)
        _, X_star = inst.optimum()
        Xs = StiefelPoint(X_star)
        _, egrad = inst.full_value_egrad(Xs.X)
        assert riemannian_grad(Xs, egrad, 0.0).norm() <= 1e-10

    def test_rho_invariance_under_symmetry(self):
        # X^T egrad symmetric for the quadratic objective, so the skew term
        # vanishes and every rho gives the same gradient
        inst = PcaInstance(pca_generate(10, 20, seed=2), r=2)
        X = random_point(10, 2)
        _, egrad = inst.full_value_egrad(X.X)
        g0 = riemannian_grad(X, egrad, 0.0)
        g1 = riemannian_grad(X, egrad, 0.25)
        np.testing.assert_allclose(g0.E, g1.E, atol=1e-12)

    def test_defining_identity(self):
        # <grad f, E>_X = <egrad, E> for tangent E
        X = random_point()
        egrad = rng.standard_normal(X.shape)
        for rho in (0.125, 0.25, 1.0):
            g = riemannian_grad(X, egrad, rho)
            for _ in range(50):
                E = tangent_project(X, rng.standard_normal(X.shape))
                lhs = inner_x(X, g, E, rho)
                rhs = float(np.sum(egrad * E.E))
                assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))

    def test_linearity_in_egrad(self):
        X = random_point()
        egrad = rng.standard_normal(X.shape)
        g1 = riemannian_grad(X, egrad, 0.5).E
        g2 = riemannian_grad(X, 3.0 * egrad, 0.5).E
        np.testing.assert_allclose(g2, 3.0 * g1, rtol=1e-13, atol=1e-15)


class TestInnerX:
    def test_quarter_rho_euclidean(self):
        X = random_point()
        E1 = tangent_project(X, rng.standard_normal(X.shape))
        E2 = tangent_project(X, rng.standard_normal(X.shape))
        got = inner_x(X, E1, E2, 0.25)
        assert abs(got - np.sum(E1.E * E2.E)) <= 1e-12

    def test_norm_equivalence(self):
        for _ in range(250):
            X = random_point()
            for rho in (0.0, 0.125, 0.25, 1.0):
                space = TangentSpace.GRASSMANN if rho == 0.0 else TangentSpace.STIEFEL
                E = tangent_project(X, rng.standard_normal(X.shape), space)
                q = inner_x(X, E, E, rho)
                n2 = E.norm() ** 2
                nu = nu_of_rho(rho)
                gamma = gamma_of_rho(rho)
                assert nu * n2 - 1e-10 <= q <= gamma * n2 + 1e-10

    def test_grassmann_euclidean(self):
        X = random_point()
        E = tangent_project(X, rng.standard_normal(X.shape), TangentSpace.GRASSMANN)
        assert inner_x(X, E, E, 0.0) == pytest.approx(E.norm() ** 2, abs=1e-13)


class TestTangentProject:
    def test_fixed_point(self):
        X = random_point()
        E = tangent_project(X, rng.standard_normal(X.shape))
        E2 = tangent_project(X, E.E)
        np.testing.assert_allclose(E.E, E2.E, atol=1e-12)

    def test_base_point_projects_to_zero(self):
        X = random_point()
        for space in TangentSpace:
            assert tangent_project(X, X.X, space).norm() <= 1e-12

    def test_invariant_holds(self):
        X = random_point()
        for _ in range(20):
            Z = rng.standard_normal(X.shape)
            E = tangent_project(X, Z, TangentSpace.STIEFEL)
            assert np.linalg.norm(X.X.T @ E.E + E.E.T @ X.X) <= 1e-12
            H = tangent_project(X, Z, TangentSpace.GRASSMANN)
            assert np.linalg.norm(X.X.T @ H.E) <= 1e-12


def test_feasibility_error_zero_on_point():
    X = random_point()
    assert feasibility_error(X.X) <= 1e-14
