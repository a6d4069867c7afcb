import numpy as np
import pytest

from src.algebra.tracial import DomainError, schatten_norm
from src.norms.spaces import SymmetricSpace, profile_norm, symmetric_space_norm


@pytest.mark.parametrize("spec, kind, p, q", [
    ("L3", "Lp", 3.0, None),
    ("Lp:1.5", "Lp", 1.5, None),
    ("cap:2:4", "intersection", 2.0, 4.0),
    ("intersection:1:2", "intersection", 1.0, 2.0),
    ("sum:1:inf", "sum", 1.0, np.inf),
])
def test_parse(spec, kind, p, q):
    space = SymmetricSpace.parse(spec)
    assert (space.kind, space.p, space.q) == (kind, p, q)


@pytest.mark.parametrize("spec", ["cap:4:2", "L0", "box:1:2", "Lx"])
def test_parse_rejects(spec):
    with pytest.raises(DomainError):
        SymmetricSpace.parse(spec)


def test_describe_round_trips():
    for spec in ("L3", "cap:2:4", "sum:1:inf"):
        assert SymmetricSpace.parse(SymmetricSpace.parse(spec).describe()) == SymmetricSpace.parse(spec)


def test_intersection_of_identity():
    assert symmetric_space_norm(np.eye(4), SymmetricSpace.intersection(1.0, 2.0)) == pytest.approx(4.0)


def test_sum_exact_couple():
    assert symmetric_space_norm(np.diag([3.0, 1.0]), SymmetricSpace.sum(1.0, np.inf)) == pytest.approx(3.0)


def test_sum_below_each_norm(rng):
    x = rng.standard_normal((4, 4))
    value = symmetric_space_norm(x, SymmetricSpace.sum(1.0, 2.0))
    assert value <= min(schatten_norm(x, 1.0), schatten_norm(x, 2.0)) + 1e-9


def test_lp_is_schatten(rng):
    x = rng.standard_normal((3, 3))
    assert symmetric_space_norm(x, SymmetricSpace.lp(3.0)) == pytest.approx(schatten_norm(x, 3.0))


@pytest.mark.parametrize("spec", ["L0.5", "L3", "cap:2:4", "sum:1:2", "sum:1:inf"])
def test_profile_norm_ignores_order(rng, spec):
    space = SymmetricSpace.parse(spec)
    x = rng.standard_normal((5, 5))
    s = np.linalg.svd(x, compute_uv=False)
    assert profile_norm(s[::-1], space) == pytest.approx(symmetric_space_norm(x, space), rel=1e-9)
