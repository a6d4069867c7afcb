import numpy as np
import pytest

from src.algebra.tracial import (
    DomainError,
    SpectralError,
    TracialAlgebra,
    check_exponent,
    conjugate_exponent,
    func_calc,
    min_eigenvalue,
    psd_power,
    psd_root_norm,
    pseudo_inverse,
    schatten_norm,
    singular_profile,
    support_projection,
    vector_quasinorm,
)


def test_singular_profile_of_diagonal():
    assert np.allclose(singular_profile(np.diag([1.0, -2.0])), [2.0, 1.0])
    assert np.allclose(singular_profile(np.eye(3)), [1.0, 1.0, 1.0])


def test_singular_profile_unitary_invariance(rng):
    algebra = TracialAlgebra(5)
    x = algebra.random_ginibre(rng)
    u, v = algebra.random_unitary(rng), algebra.random_unitary(rng)
    assert np.allclose(singular_profile(u @ x @ v), singular_profile(x), atol=1e-10)


@pytest.mark.parametrize("p, expected", [(2.0, 5.0), (1.0, 7.0), (np.inf, 4.0)])
def test_schatten_norm_of_diagonal(p, expected):
    assert schatten_norm(np.diag([3.0, 4.0]), p) == pytest.approx(expected)


@pytest.mark.parametrize("p", [0.5, 1.0, 3.0])
def test_schatten_norm_of_identity(p):
    assert schatten_norm(np.eye(4), p) == pytest.approx(4.0 ** (1.0 / p))


def test_trace_norm_matches_singular_values(rng):
    x = TracialAlgebra(6).random_ginibre(rng)
    assert schatten_norm(x, 1.0) == pytest.approx(np.sum(singular_profile(x)), abs=1e-10)


def test_quasinorm_below_one():
    assert vector_quasinorm([1.0, 1.0], 0.5) == pytest.approx(4.0)
    assert vector_quasinorm([0.0, 0.0], 0.3) == 0.0


def test_nonpositive_exponent_is_a_domain_error():
    with pytest.raises(DomainError):
        schatten_norm(np.eye(2), 0.0)
    with pytest.raises(ValueError):
        check_exponent(-1.0)


def test_func_calc_sqrt_and_identity(rng):
    assert np.allclose(func_calc(np.diag([1.0, 4.0]), np.sqrt), np.diag([1.0, 2.0]))
    g = TracialAlgebra(4).random_ginibre(rng)
    x = g.conj().T @ g
    assert np.allclose(func_calc(x, lambda t: t), x, atol=1e-10)


def test_func_calc_semigroup(rng):
    g = TracialAlgebra(4).random_ginibre(rng)
    x = g.conj().T @ g
    small = func_calc(x, lambda t: t ** 0.3)
    assert np.allclose(np.linalg.matrix_power(small, 4), func_calc(x, lambda t: t ** 1.2), atol=1e-8)


def test_non_psd_input_raises():
    with pytest.raises(SpectralError, match="not PSD"):
        func_calc(np.diag([1.0, -1.0]), np.sqrt)


def test_pseudo_inverse():
    assert np.allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    x = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(pseudo_inverse(x), np.linalg.inv(x), rtol=1e-9)


def test_penrose_identity_on_rank_deficient(rng):
    v = TracialAlgebra(5).random_ginibre(rng)[:, :2]
    x = v @ v.conj().T
    assert np.allclose(x @ pseudo_inverse(x) @ x, x, atol=1e-8)
    projection = support_projection(x)
    assert np.trace(projection).real == pytest.approx(2.0)


def test_psd_power_negative_exponent_uses_support():
    assert np.allclose(psd_power(np.diag([4.0, 0.0]), -0.5), np.diag([0.5, 0.0]))
    assert np.allclose(psd_power(np.diag([1.0, 1e-14]), -1.0, cutoff=1e-12), np.diag([1.0, 0.0]))


def test_psd_root_norm():
    assert psd_root_norm(np.diag([9.0, 16.0]), 2.0) == pytest.approx(5.0)


def test_conjugate_exponent():
    assert np.isinf(conjugate_exponent(1.0))
    assert conjugate_exponent(2.0) == 2.0
    assert conjugate_exponent(np.inf) == 1.0


def test_algebra_validation_and_unitary(rng):
    algebra = TracialAlgebra(3)
    with pytest.raises(DomainError):
        algebra.validate(np.eye(2))
    with pytest.raises(DomainError):
        TracialAlgebra(0)
    u = algebra.random_unitary(rng)
    assert np.allclose(u.conj().T @ u, np.eye(3), atol=1e-12)
    assert algebra.trace(np.eye(3)) == pytest.approx(3.0)
    assert min_eigenvalue(np.diag([2.0, -1.0, 0.5])) == pytest.approx(-1.0)


@pytest.fixture
def pair(rng):
    algebra = TracialAlgebra(6)
    return algebra.random_ginibre(rng), algebra.random_ginibre(rng)


def test_trace_is_tracial_and_positive(pair):
    x, y = pair
    algebra = TracialAlgebra(6)
    assert abs(algebra.trace(x @ y) - algebra.trace(y @ x)) <= 1e-10 * abs(algebra.trace(x @ y))
    assert algebra.trace(x.conj().T @ x).real >= 0.0
    assert abs(algebra.trace(x.conj().T @ x).imag) <= 1e-12


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_trace_holder(pair, p):
    x, y = pair
    bound = schatten_norm(x, p) * schatten_norm(y, conjugate_exponent(p))
    assert abs(np.trace(x @ y)) <= bound * (1.0 + 1e-12)


@pytest.mark.parametrize("p", [0.3, 0.5, 1.0, 1.5, 2.0, 3.0, np.inf])
def test_schatten_norm_from_eigenvalues(pair, p):
    x, _ = pair
    values = np.sqrt(np.clip(np.linalg.eigvalsh(x.conj().T @ x), 0.0, None))
    expected = values.max() if np.isinf(p) else np.sum(values ** p) ** (1.0 / p)
    assert schatten_norm(x, p) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("p", [0.5, 1.0, np.inf])
def test_schatten_norm_unitary_invariance(rng, pair, p):
    x, _ = pair
    algebra = TracialAlgebra(6)
    u, v = algebra.random_unitary(rng), algebra.random_unitary(rng)
    assert schatten_norm(u @ x @ v, p) == pytest.approx(schatten_norm(x, p), rel=1e-10)


def test_pseudo_inverse_reconstruction(pair):
    """|ξ|² <= ς² gives ξ pinv(ς) ς = ξ, also when ς is singular."""
    x, y = pair
    projection = np.diag([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    xi, eta = x @ projection, y @ projection
    sigma = psd_power(xi.conj().T @ xi + eta.conj().T @ eta, 0.5)
    assert np.allclose(xi @ pseudo_inverse(sigma) @ sigma, xi, atol=1e-8)
