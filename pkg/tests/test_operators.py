import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semigroup_lab import operators as ops
from semigroup_lab.operators import OperatorError
from semigroup_lab.semigroup import expm_oracle
from tests.conftest import complex_matrices


def test_zero_applies_to_zero():
    A = ops.zero(3)
    x = np.array([1.0, -2.0, 3j])
    assert np.array_equal(A.apply(x), np.zeros(3))


def test_nilpotent_shift_dense_form():
    assert np.array_equal(ops.nilpotent_shift(2).to_dense(), [[0, 1], [0, 0]])


def test_laplacian_dense_equivalent():
    A = ops.laplacian1d(3, 1.0)
    assert A.kind == "matrix_free"
    assert np.array_equal(A.to_dense(), [[-2, 1, 0], [1, -2, 1], [0, 1, -2]])


@pytest.mark.parametrize("spec", ops.BUILTIN_SPECS + ["zero:n=3", "nilpotent_shift:4", "random_bounded:n=5,seed=1,cap=2",
                                                      "identity:2", "diag:1+2j,-3"])
def test_apply_matches_dense_on_basis(spec):
    A = ops.make_operator(spec)
    eye = np.eye(A.dim, dtype=complex)
    cols = np.column_stack([A.apply(e) for e in eye])
    assert np.max(np.abs(cols - A.to_dense())) <= 1e-14


@pytest.mark.parametrize("spec", ops.BUILTIN_SPECS)
def test_apply_is_linear(spec, rng):
    A = ops.make_operator(spec)
    x, y = rng.standard_normal((2, A.dim)) + 1j * rng.standard_normal((2, A.dim))
    a, b = 0.3 - 1.2j, 2.5
    lhs = A.apply(a * x + b * y) - a * A.apply(x) - b * A.apply(y)
    assert np.linalg.norm(lhs) <= 1e-12 * (np.linalg.norm(x) + np.linalg.norm(y))


def test_laplacian_shifted_solve(rng):
    A = ops.laplacian1d(40, 1 / 41)
    b = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    for lam in (1.0, 0.5 + 3j, -1.0):
        y = A.solve_shifted(lam, b)
        assert np.linalg.norm(lam * y - A.apply(y) - b) <= 1e-10 * np.linalg.norm(b)


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[1.0, np.nan], [0, 1]]), np.zeros((0, 0))])
def test_from_matrix_rejects(bad):
    with pytest.raises(OperatorError):
        ops.from_matrix(bad)


@pytest.mark.parametrize("spec", ["zero:n=0", "laplacian1d:n=-2,h=1", "bogus:3", "jordan:lambda=1", "zero:n=2.5",
                                  "rotation2:1"])
def test_bad_specs(spec):
    with pytest.raises(OperatorError):
        ops.make_operator(spec)


def test_matrix_files(tmp_path):
    m = np.array([[1.0, 2.0], [-3.0, 0.5]])
    csv_path = tmp_path / "m.csv"
    csv_path.write_text("1,2\n-3,0.5\n")
    assert np.array_equal(ops.make_operator(str(csv_path)).to_dense(), m)
    js = tmp_path / "m.json"
    js.write_text(json.dumps({"rows": 2, "cols": 2, "re": [1, 2, -3, 0.5], "im": [0, 1, 0, 0]}))
    A = ops.make_operator("file:" + str(js))
    assert A.to_dense()[0, 1] == 2 + 1j
    bad = tmp_path / "r.csv"
    bad.write_text("1,2\n3\n")
    with pytest.raises(OperatorError):
        ops.make_operator(str(bad))


def test_operator_norm_examples():
    assert ops.operator_norm(ops.identity(4)) == pytest.approx(1.0, abs=1e-15)
    assert ops.operator_norm(ops.diag([1, -3])) == pytest.approx(3.0, abs=1e-15)
    A = ops.random_bounded(6, seed=1, norm_cap=1)
    val = ops.operator_norm(A)
    assert 0 < val <= 1 + 1e-12
    assert val == pytest.approx(np.linalg.svd(A.to_dense(), compute_uv=False)[0], rel=1e-12)


def test_matrix_free_norm_is_flagged_estimate():
    A = ops.laplacian1d(20, 1 / 21)
    res = ops.operator_norm(A, full_output=True)
    exact = np.max(np.abs(ops.laplacian1d_eigenvalues(20, 1 / 21)))
    assert res.estimate
    assert res.value == pytest.approx(exact, rel=1e-7)


def test_spectrum_examples():
    s = ops.spectrum(ops.nilpotent_shift(3))
    assert np.allclose(s.eigenvalues, 0) and s.spectral_radius == 0
    s = ops.spectrum(ops.diag([1, 2, 3]))
    assert s.spectral_radius == 3 and s.spectral_abscissa == 3


@pytest.mark.parametrize("n,h", [(6, 1.0), (31, 1 / 32), (50, 0.02)])
def test_laplacian_eigenvalues_closed_form(n, h):
    ev = np.sort(ops.spectrum(ops.laplacian1d(n, h)).eigenvalues.real)
    closed = np.sort(ops.laplacian1d_eigenvalues(n, h))
    k = np.arange(1, n + 1)
    assert np.allclose(closed, np.sort(-(4 / h**2) * np.sin(k * np.pi / (2 * (n + 1))) ** 2))
    assert np.max(np.abs(ev - closed)) <= 1e-10 * max(1.0, np.max(np.abs(closed)))


def test_growth_envelope_examples():
    env = ops.estimate_growth_envelope(ops.from_matrix(-np.eye(2)), 5.0)
    assert env.omega == 0 and env.M == 1
    env = ops.estimate_growth_envelope(ops.diag([1.0]), 3.0)
    assert env.omega == pytest.approx(1.0, abs=2e-6) and env.M == pytest.approx(1.0, abs=1e-9)
    env = ops.estimate_growth_envelope(ops.jordan(0, 2), 4.0, grid_size=41)
    ts = env.sample_grid[:, 0]
    closed = np.sqrt(2 + ts**2 + ts * np.sqrt(4 + ts**2)) / np.sqrt(2)
    assert env.omega == pytest.approx(1e-6)
    assert env.M == pytest.approx(np.max(closed * np.exp(-env.omega * ts)), rel=1e-12)


@pytest.mark.parametrize("spec", ops.BUILTIN_SPECS)
def test_growth_envelope_certifies_fresh_grid(spec, rng):
    A = ops.make_operator(spec)
    env = ops.estimate_growth_envelope(A, 4.0)
    assert env.certifies(env.sample_grid[:, 0], env.sample_grid[:, 1])
    ts = np.sort(rng.uniform(0, 4.0, 40))
    norms = [np.linalg.norm(expm_oracle(A, t), 2) for t in ts]
    assert np.all(np.asarray(norms) <= 1.01 * env.bound(ts))


@pytest.mark.parametrize("spec", ["diag:-1,-2,0.5", "random_bounded:n=5,seed=2,cap=3", "rotation2"])
def test_gelfand_radius_formula(spec):
    A = ops.make_operator(spec)
    a = A.to_dense()
    r = ops.spectrum(A).spectral_radius
    gaps = [abs(np.linalg.norm(np.linalg.matrix_power(a, k), 2) ** (1 / k) - r) for k in (8, 16, 32)]
    assert all(g <= 0.1 * r for g in gaps)
    assert gaps[0] >= gaps[1] - 1e-12 >= gaps[2] - 2e-12


@given(complex_matrices())
def test_spectral_radius_below_norm(m):
    A = ops.from_matrix(m)
    assert ops.spectrum(A).spectral_radius <= ops.operator_norm(A) * (1 + 1e-12)


@given(st.integers(1, 12), st.integers(0, 1000))
def test_random_dissipative_is_dissipative(n, seed):
    a = ops.random_dissipative(n, seed).to_dense()
    assert np.max(np.linalg.eigvalsh((a + a.conj().T) / 2)) < 0


def test_builtin_sets():
    assert len(ops.builtin_operators()) == 6
    for A in ops.dissipative_operators():
        a = A.to_dense()
        assert np.max(np.linalg.eigvalsh((a + a.conj().T) / 2)) <= 1e-12
