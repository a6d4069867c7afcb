import numpy as np
import pytest

from src.algebra.tracial import DomainError
from src.davis.decomposition import (
    MARTINGALE_CONSTANT,
    classical_cross_check,
    classical_davis,
    davis_type1,
    davis_type2,
    martingale_davis,
    previsible_davis,
)
from src.martingales.filtration import AdaptedSequence, Filtration, Martingale, random_adapted, random_martingale


@pytest.fixture
def scalar_pair():
    return AdaptedSequence(np.ones((2, 1, 1)), Filtration.trivial(1, 2))


def test_type1_scalar_example(scalar_pair):
    d = davis_type1(scalar_pair, 1.0)
    assert d.alpha == pytest.approx(0.5)
    assert np.allclose(d.weights[:, 0, 0], [1.0, 2.0 ** 0.25])
    assert np.allclose(d.y.terms[:, 0, 0], [1.0, 1.0 - 2.0 ** -0.25])
    assert np.allclose(d.z.terms[:, 0, 0], [0.0, 2.0 ** -0.25])


def test_type2_scalar_example(scalar_pair):
    d = davis_type2(scalar_pair, 0.5)
    assert d.alpha == pytest.approx(0.75)
    assert d.y.terms[1, 0, 0].real == pytest.approx((2.0 ** 0.75 - 1.0) / 2.0 ** 0.75)
    assert d.z.terms[1, 0, 0].real == pytest.approx(2.0 ** -0.75)


def test_first_step_is_all_y():
    xi = random_adapted(Filtration.tensor([2]), seed=4)
    for build, p in ((davis_type1, 1.0), (davis_type2, 0.5)):
        d = build(xi, p)
        assert np.allclose(d.y.terms, xi.terms)
        assert not np.any(d.z.terms)


@pytest.mark.parametrize("p", [0.7, 1.0, 1.5])
def test_type1_reconstruction_and_weights(adapted, p):
    d = davis_type1(adapted, p)
    assert d.reconstruction_error() <= 1e-8
    assert d.weight_monotonicity_margin() >= -1e-8


@pytest.mark.parametrize("p", [0.3, 0.5, 1.0])
def test_type2_witness_factorizes_y(adapted, p):
    d = davis_type2(adapted, p)
    assert np.allclose(d.witness_left @ d.witness_right, d.column_y.terms, atol=1e-8)
    assert d.in_theorem_range == (p < 2.0 / 3.0)


def test_row_side_decomposes_the_adjoint(adapted):
    d = davis_type1(adapted, 1.0, side="row")
    assert d.reconstruction_error() <= 1e-8
    assert np.allclose(d.column_xi.terms, np.conj(np.swapaxes(adapted.terms, 1, 2)))


@pytest.mark.parametrize("build, p", [(davis_type1, 0.5), (davis_type1, 2.0), (davis_type2, 0.0), (davis_type2, 2.5)])
def test_exponent_ranges(adapted, build, p):
    with pytest.raises(DomainError):
        build(adapted, p)


def test_martingale_davis_certificate(martingale):
    x_d, x_c, cert = martingale_davis(martingale, 1.0, 2.0)
    assert cert.passed
    assert cert.row("davis-martingale-p").constant == MARTINGALE_CONSTANT
    assert not cert.row("davis-martingale-q").asserted
    assert np.allclose(x_d.final + x_c.final, martingale.final, atol=1e-8)


def test_martingale_davis_single_difference(single_difference):
    x_d, x_c, cert = martingale_davis(single_difference)
    assert np.allclose(x_d.differences, single_difference.differences)
    assert not np.any(x_c.differences)
    assert cert.passed


def test_martingale_davis_row_side(martingale):
    x_d, x_c, cert = martingale_davis(martingale, side="row")
    assert cert.name == "martingale-davis-row"
    assert np.allclose(x_d.final + x_c.final, martingale.final, atol=1e-8)


def test_martingale_davis_range(martingale):
    with pytest.raises(DomainError):
        martingale_davis(martingale, 0.5, 2.0)
    with pytest.raises(DomainError):
        martingale_davis(martingale, 1.0, np.inf)


def test_previsible_random(dyadic_filtration):
    x = random_martingale(dyadic_filtration, seed=21)
    _, x_c, cert = previsible_davis(x)
    assert cert.passed
    assert not np.any(x_c.differences[0])


def test_previsible_stated_constant_is_exceeded():
    """S_{n-1} = 1 and dx = 990 w.p. 1/100, -10 otherwise: |dx^c|² reaches about 3.9 S²."""
    dim = 100
    f = Filtration.partition([[0] * dim, list(range(dim))])
    spike = np.full(dim, -10.0)
    spike[0] = 990.0
    x = Martingale(np.stack([np.eye(dim), np.diag(spike)]).astype(complex), f)
    _, x_c, cert = previsible_davis(x)
    assert cert.row("previsible-margin").passed
    stated = cert.row("previsible-margin-2")
    assert not stated.passed and not stated.asserted
    assert "stated-previsible-constant-exceeded" in cert.flags
    assert abs(x_c.differences[1][0, 0]) ** 2 == pytest.approx(3.9, abs=0.01)
    assert cert.passed


def test_small_singular_value_stays_on_the_support():
    """ς² = diag(1, 1e-14) puts w at diag(1, 10^-3.5), far above the cutoff on w."""
    xi = AdaptedSequence(np.diag([1.0, 1e-7])[None].astype(complex), Filtration.trivial(2, 1))
    d = davis_type1(xi, 1.0)
    assert d.reconstruction_error() <= 1e-12
    assert np.allclose(d.y.terms, xi.terms, rtol=0.0, atol=1e-12)


@pytest.mark.parametrize("p", [0.7, 1.0, 1.5])
def test_small_component_on_half_the_atoms(dyadic_filtration, p):
    mask = np.diag([1.0] * 4 + [1e-6] * 4)
    terms = random_adapted(dyadic_filtration, seed=31).terms @ mask
    terms[0] = mask
    d = davis_type1(AdaptedSequence(terms, dyadic_filtration), p)
    assert d.reconstruction_error() <= 1e-8 * np.max(np.abs(terms))


@pytest.mark.parametrize("build, p", [(davis_type1, 1.0), (davis_type2, 0.5)])
def test_rank_deficient_reconstruction(tensor_filtration, build, p):
    xi = random_adapted(tensor_filtration, seed=14)
    projection = np.kron(np.diag([1.0, 0.0]), np.eye(4))
    terms = xi.terms @ projection
    terms[2] = 0.0
    d = build(AdaptedSequence(terms, tensor_filtration), p)
    assert d.reconstruction_error() <= 1e-8
    assert np.allclose(d.y.terms @ (np.eye(8) - projection), 0.0, atol=1e-10)


@pytest.mark.parametrize("build, p", [(davis_type1, 0.8), (davis_type1, 1.5), (davis_type2, 0.4)])
def test_scaling_covariance(adapted, build, p):
    c = 3.7
    d = build(adapted, p)
    scaled = build(AdaptedSequence(c * adapted.terms, adapted.filtration), p)
    assert np.allclose(scaled.y.terms, c * d.y.terms, atol=1e-9)
    assert np.allclose(scaled.z.terms, c * d.z.terms, atol=1e-9)


def test_classical_davis_scalar_example():
    y, z = classical_davis(np.ones((2, 1)), 1.0)
    assert np.allclose(y[:, 0], [1.0, 1.0 - 2.0 ** -0.25])
    assert np.allclose(z[:, 0], [0.0, 2.0 ** -0.25])


def test_classical_davis_four_atoms():
    """Atom-wise values: ξ_1 = 1 everywhere, ξ_2 = ±1 on halves, ξ_3 on singletons."""
    values = np.array([[1.0, 1.0, 1.0, 1.0], [1.0, 1.0, -1.0, -1.0], [2.0, 0.0, 0.0, -1.0]])
    y, z = classical_davis(values, 1.0)
    sigma = np.sqrt(np.cumsum(values ** 2, axis=0))
    w = sigma ** 0.5
    assert np.allclose(y[2], values[2] * (w[2] - w[1]) / w[2])
    assert np.allclose(z[2], values[2] * w[1] / w[2])
    assert np.allclose(y + z, values)


@pytest.mark.parametrize("build, p", [(davis_type1, 0.7), (davis_type1, 1.0), (davis_type2, 0.3)])
def test_classical_cross_check(dyadic_filtration, build, p):
    d = build(random_adapted(dyadic_filtration, seed=41), p)
    row = classical_cross_check(d)
    assert row.check == f"{d.variant}-classical"
    assert row.passed


def test_classical_cross_check_needs_partitions(adapted):
    with pytest.raises(DomainError):
        classical_cross_check(davis_type1(adapted, 1.0))
