import numpy as np
import pytest

from src.algebra.tracial import DomainError, TracialAlgebra, schatten_norm
from src.harness.config import DEFAULT_KFUNC_POINTS
from src.kfunc.functionals import (
    Couple,
    brute_force_k,
    brute_force_split_k,
    holmstedt_estimate,
    j_functional,
    k_functional,
    k_functional_curve,
    solve_profile,
)

EXACT_FIXTURES = [
    ([3.0, 1.0], 2.0, 4.0),
    ([3.0, 1.0], 0.5, 1.5),
    ([3.0, 1.0], 1.5, 3.5),
    ([3.0, 1.0], 5.0, 4.0),
    ([2.0, 2.0, 2.0], 1.0, 2.0),
    ([2.0, 2.0, 2.0], 2.25, 4.5),
    ([5.0, 0.0], 0.1, 0.5),
    ([4.0, 3.0, 2.0, 1.0], 3.0, 9.0),
    ([4.0, 3.0, 2.0, 1.0], 2.5, 8.0),
    ([1.0], 0.25, 0.25),
]


@pytest.mark.parametrize("values, t, expected", EXACT_FIXTURES)
def test_exact_l1_linf(values, t, expected):
    assert k_functional(np.diag(values), t, (1.0, np.inf)) == pytest.approx(expected, abs=1e-10)


def test_invalid_arguments():
    with pytest.raises(DomainError):
        Couple(2.0, 1.0)
    with pytest.raises(DomainError):
        k_functional(np.eye(2), 0.0, (1.0, 2.0))
    with pytest.raises(DomainError):
        brute_force_k(np.ones(4), 1.0, (1.0, 2.0))


@pytest.mark.parametrize("p, q, t", [(2.0, 4.0, 1.0), (1.0, 2.0, 0.7), (1.5, 3.0, 2.0), (2.0, np.inf, 0.8)])
def test_matches_brute_force(p, q, t):
    s = np.array([0.45, 0.2])
    assert solve_profile(s, t, (p, q)).value == pytest.approx(brute_force_k(s, t, (p, q), 2.5e-4), abs=1e-3)


def test_brute_force_matches_exact_profile():
    s = np.array([1.0, 1.0])
    assert solve_profile(s, 1.0, (2.0, 4.0)).value == pytest.approx(brute_force_k(s, 1.0, (2.0, 4.0)), abs=1e-3)


def test_min_bound_and_j(rng):
    x = rng.standard_normal((5, 5))
    for t in (0.1, 1.0, 10.0):
        k = k_functional(x, t, (1.0, 2.0))
        assert k <= min(schatten_norm(x, 1.0), t * schatten_norm(x, 2.0)) + 1e-9
        assert k <= j_functional(x, t, (1.0, 2.0)) + 1e-9


def test_large_t_reaches_p_norm(rng):
    x = rng.standard_normal((4, 4))
    assert k_functional(x, 1e6, (1.0, 2.0)) == pytest.approx(schatten_norm(x, 1.0), rel=1e-6)


def test_j_functional_limits():
    assert j_functional(np.eye(1), 1.0, (1.0, 2.0)) == pytest.approx(1.0)
    x = np.diag([2.0, 1.0])
    assert j_functional(x, 1e-9, (1.0, 2.0)) == pytest.approx(3.0)


def test_holmstedt_equivalence_on_exact_couple(rng):
    x = rng.standard_normal((6, 6))
    for t in (0.5, 2.0, 4.5):
        ratio = holmstedt_estimate(x, t, (1.0, np.inf)) / k_functional(x, t, (1.0, np.inf))
        assert 1.0 - 1e-12 <= ratio <= 2.0 + 1e-12
    assert holmstedt_estimate(np.zeros((2, 2)), 1.0, (1.0, 2.0)) == 0.0


def test_curve_is_concave_and_exported(tmp_path, rng):
    x = rng.standard_normal((6, 6))
    curve = k_functional_curve(x, np.logspace(-1, 0.7, 15), (1.0, np.inf))
    assert curve.is_concave(1e-6)
    assert curve.min_bound_violation() <= 1e-9
    diagnostics = curve.diagnostics()
    assert diagnostics["points"] == 15
    path = curve.to_csv(tmp_path / "curve.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,k,converged"
    assert len(lines) == 16


@pytest.mark.parametrize("couple", [(1.0, np.inf), (2.0, 4.0), (1.0, 2.0)])
def test_unitary_invariance(rng, couple):
    algebra = TracialAlgebra(5)
    x = algebra.random_ginibre(rng)
    u, v = algebra.random_unitary(rng), algebra.random_unitary(rng)
    for t in (0.3, 1.0, 2.5):
        assert k_functional(u @ x @ v, t, couple) == pytest.approx(k_functional(x, t, couple), rel=1e-6)


@pytest.mark.parametrize("couple", [(1.0, 2.0), (2.0, 4.0), (1.5, 3.0), (1.0, np.inf)])
@pytest.mark.parametrize("t", [0.6, 1.5])
def test_non_commuting_splits_do_no_better(couple, t):
    x = np.array([[1.0, 0.6], [-0.3, 0.5]])
    exact = k_functional(x, t, couple)
    brute = brute_force_split_k(x, t, couple)
    assert brute >= exact - 1e-6
    assert brute == pytest.approx(exact, abs=1e-2)


def test_split_brute_force_rejects_complex():
    with pytest.raises(DomainError):
        brute_force_split_k(np.eye(2) * 1j, 1.0, (1.0, 2.0))
    with pytest.raises(DomainError):
        brute_force_split_k(np.eye(3), 1.0, (1.0, 2.0))


def test_large_q_approaches_exact_couple(rng):
    for _ in range(3):
        x = rng.standard_normal((6, 6))
        for t in (0.5, 2.0, 4.5):
            exact = k_functional(x, t, (1.0, np.inf))
            assert exact * (1.0 - 1e-9) <= k_functional(x, t, (1.0, 64.0)) <= 1.05 * exact


@pytest.mark.parametrize("t, p, q", DEFAULT_KFUNC_POINTS)
def test_default_grid_matches_brute_force(t, p, q):
    s = np.array([0.45, 0.2])
    assert solve_profile(s, t, (p, q)).value == pytest.approx(brute_force_k(s, t, (p, q), 2.5e-4), abs=1e-3)
