import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semigroup_lab import operators as ops
from semigroup_lab import resolvent as res
from semigroup_lab.operators import GrowthEnvelope
from tests.conftest import complex_matrices


def test_resolvent_of_zero():
    r = res.resolvent(ops.zero(2), 1.0)
    assert r.in_resolvent_set
    assert np.allclose(r.matrix, np.eye(2), atol=1e-15)


def test_resolvent_of_shift():
    r = res.resolvent(ops.nilpotent_shift(2), 2.0)
    assert np.allclose(r.matrix, [[0.5, 0.25], [0, 0.5]], atol=1e-15)


def test_resolvent_residual_dense_solve(rng):
    A = ops.random_dissipative(6, seed=3)
    r = res.resolvent(A, 0.5 + 2j)
    b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    y = r(b)
    assert np.linalg.norm((0.5 + 2j) * y - A.apply(y) - b) <= 1e-10 * np.linalg.norm(b)
    assert np.allclose(y, np.linalg.solve((0.5 + 2j) * np.eye(6) - A.to_dense(), b), rtol=1e-12)


def test_singular_shift_is_reported_not_raised():
    r = res.resolvent(ops.diag([1.0, 2.0]), 2.0)
    assert not r.in_resolvent_set
    assert r.norm_estimate == np.inf
    with pytest.raises(res.ShiftError):
        res.resolvent_matrix(ops.diag([1.0, 2.0]), 2.0)


def test_matrix_free_resolvent_membership():
    A = ops.laplacian1d(5, 1.0)
    ev = ops.laplacian1d_eigenvalues(5, 1.0)
    assert res.resolvent(A, 1.0).in_resolvent_set
    assert not res.resolvent(A, ev[2]).in_resolvent_set


@pytest.mark.parametrize("spec", ops.BUILTIN_SPECS)
def test_resolvent_residual_over_probes(spec, rng):
    A = ops.make_operator(spec)
    for lam in (0.7 + 0.3j, 3.0, -0.4 + 2j):
        r = res.resolvent(A, lam)
        if not r.in_resolvent_set or r.cond > 1e10:
            continue
        b = rng.standard_normal((A.dim, 100)) + 1j * rng.standard_normal((A.dim, 100))
        y = r(b)
        resid = np.linalg.norm(lam * y - A.apply(y) - b, axis=0)
        assert np.all(resid <= 1e-10 * np.linalg.norm(b, axis=0))


def test_identity_equal_shifts():
    rep = res.check_resolvent_identity(ops.random_dissipative(4, 1), 1 + 1j, 1 + 1j)
    assert rep.ok and rep.residual("identity").value == 0


def test_identity_diagonal():
    rep = res.check_resolvent_identity(ops.diag([-1, -2]), 1, 2)
    assert rep.ok and rep.residual("identity").value <= 1e-12


def test_identity_jordan():
    assert res.check_resolvent_identity(ops.jordan(0, 3), 1 + 1j, 2 - 1j).ok


def test_identity_rejects_spectrum():
    with pytest.raises(res.ShiftError):
        res.check_resolvent_identity(ops.diag([1.0]), 1.0, 2.0)


@given(complex_matrices(), st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_identity_property(m, lam, mu):
    A = ops.from_matrix(m)
    ra, rb = res.resolvent(A, lam), res.resolvent(A, mu)
    if not (ra.in_resolvent_set and rb.in_resolvent_set) or max(ra.cond, rb.cond) > 1e8:
        return
    assert res.check_resolvent_identity(A, lam, mu).ok


def test_neumann_zero_one_term():
    r = res.neumann_resolvent(ops.zero(3), 2.0 - 1j)
    assert r.terms == 1
    assert np.allclose(r.matrix, np.eye(3) / (2 - 1j), atol=1e-16)


def test_neumann_nilpotent_exact_three_terms():
    A = ops.nilpotent_shift(3)
    r = res.neumann_resolvent(A, 1.0)
    a = A.to_dense()
    assert r.terms == 3
    assert np.array_equal(r.matrix, np.eye(3) + a + a @ a)


def test_neumann_random_bounded():
    A = ops.random_bounded(5, seed=7, norm_cap=0.8)
    r = res.neumann_resolvent(A, 2.0, tol=1e-10)
    assert np.linalg.norm(r.matrix - res.resolvent_matrix(A, 2.0), 2) <= 1e-9


@given(st.integers(1, 8), st.integers(0, 500), st.floats(1.0101, 4.0), st.floats(0, 2 * np.pi))
def test_neumann_within_ten_tol(n, seed, ratio, phase):
    A = ops.random_bounded(n, seed, 1.5)
    lam = ratio * 1.5 * np.exp(1j * phase)
    tol = 1e-11
    r = res.neumann_resolvent(A, lam, tol=tol)
    assert np.linalg.norm(r.matrix - res.resolvent_matrix(A, lam), 2) <= 10 * tol


def test_neumann_precondition():
    with pytest.raises(ValueError):
        res.neumann_resolvent(ops.diag([1.0, 2.0]), 2.01)


@pytest.mark.parametrize("spec", ["diag:-1,-2,0.5", "random_dissipative:n=6,seed=1", "jordan:lambda=-1,n=3"])
def test_derivative_of_resolvent(spec):
    A = ops.make_operator(spec)
    lam = 1.5 + 0.5j
    h = 1e-5 * max(1.0, abs(lam))
    fd = (res.resolvent_matrix(A, lam + h) - res.resolvent_matrix(A, lam - h)) / (2 * h)
    r = res.resolvent_matrix(A, lam)
    exact = -r @ r
    assert np.linalg.norm(fd - exact, 2) <= 1e-6 * np.linalg.norm(exact, 2)


def test_pseudo_resolvent_from_operator():
    fam = res.PseudoResolventFamily.from_operator(ops.diag([-1, -2]), [1, 2, 3])
    rep = res.check_pseudo_resolvent(fam)
    assert rep.ok
    assert rep.residual("identity (relative)").value <= 1e-10
    assert np.allclose(rep.data["reconstruction"], np.diag([-1, -2]), atol=1e-9)


def test_pseudo_resolvent_zero_family():
    fam = res.PseudoResolventFamily({complex(l): np.zeros((2, 2)) for l in (1, 2, 3)})
    rep = res.check_pseudo_resolvent(fam)
    assert rep.ok
    assert rep.data["ranks"] == [0, 0, 0] and not rep.data["injective"]
    assert "reconstruction" not in rep.data


def test_pseudo_resolvent_perturbed_fails():
    fam = res.PseudoResolventFamily.from_operator(ops.diag([-1, -2]), [1, 2, 3])
    fam.samples[2 + 0j] = fam.samples[2 + 0j] + 0.1 * np.eye(2)
    rep = res.check_pseudo_resolvent(fam)
    assert not rep.ok
    assert rep.residual("identity (relative)").value > 1e-2


def test_pseudo_resolvent_needs_two():
    with pytest.raises(ValueError):
        res.check_pseudo_resolvent(res.PseudoResolventFamily({1 + 0j: np.eye(2)}))


@given(st.integers(2, 8), st.integers(0, 300))
def test_reconstruction_lambda_independent(n, seed):
    A = ops.random_dissipative(n, seed)
    rep = res.check_pseudo_resolvent(res.PseudoResolventFamily.from_operator(A, [0.5, 1 + 1j, 4.0]))
    assert rep.ok


def test_hille_yosida_scalar():
    rep = res.check_hille_yosida_bounds(ops.from_matrix(-np.eye(3)), GrowthEnvelope(1.0, 0.0), [2.0], 4)
    assert rep.ok
    assert rep.residual("worst ratio").value == pytest.approx((2 / 3) ** 1, rel=1e-12)


def test_hille_yosida_complex_shift():
    lam = 1 + 1j
    rep = res.check_hille_yosida_bounds(ops.diag([-1, -5]), GrowthEnvelope(1.0, 0.0), [lam], 6)
    expected = max((1 / abs(lam + 1)) ** n * lam.real**n for n in range(1, 7))
    assert rep.residual("worst ratio").value == pytest.approx(expected, rel=1e-12)
    assert rep.ok


def test_hille_yosida_dissipative_with_envelope():
    A = ops.random_dissipative(8, seed=2)
    env = ops.estimate_growth_envelope(A, 10.0)
    assert res.check_hille_yosida_bounds(A, env, env.omega + np.logspace(-1, 2, 12), 6).ok


def test_hille_yosida_guards():
    with pytest.raises(ValueError):
        res.check_hille_yosida_bounds(ops.zero(2), GrowthEnvelope(1.0, 1.0), [0.5], 2)
    with pytest.raises(ValueError):
        res.check_hille_yosida_bounds(ops.zero(2), GrowthEnvelope(1.0, 0.0), [1.0], 13)
