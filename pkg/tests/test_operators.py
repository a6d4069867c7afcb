import numpy as np
import pytest

from src.algebra.tracial import DomainError
from src.harness.operators import martingale_transform, random_signs, stein_map
from src.norms.square import square_fn


def test_stein_fixes_martingale_differences(martingale):
    image = stein_map(martingale.filtration, martingale.differences)
    assert np.allclose(image.differences, martingale.differences, atol=1e-10)


def test_stein_kills_constant_sequence(tensor_filtration, rng):
    x = tensor_filtration.algebra.random_ginibre(rng)
    image = stein_map(tensor_filtration, np.stack([x] * tensor_filtration.length))
    assert np.allclose(image.final, x, atol=1e-10)


def test_stein_of_identity_vanishes_after_first_step(tensor_filtration):
    ones = np.stack([np.eye(tensor_filtration.dim, dtype=complex)] * tensor_filtration.length)
    image = stein_map(tensor_filtration, ones)
    assert np.allclose(image.differences[0], np.eye(tensor_filtration.dim))
    assert not np.any(np.abs(image.differences[1:]) > 1e-12)


def test_stein_rejects_long_sequences(tensor_filtration):
    with pytest.raises(DomainError):
        stein_map(tensor_filtration, np.zeros((4, 8, 8)))


def test_transform_signs(martingale):
    assert np.allclose(martingale_transform(martingale, np.ones(martingale.length)).final, martingale.final)
    with pytest.raises(DomainError):
        martingale_transform(martingale, [1.0, 0.5, -1.0])
    with pytest.raises(DomainError):
        martingale_transform(martingale, [1.0, -1.0])


def test_transform_keeps_square_functions(martingale, rng):
    signs = random_signs(rng, martingale.length)
    transformed = martingale_transform(martingale, signs)
    assert np.allclose(square_fn(transformed).final, square_fn(martingale).final, atol=1e-10)
    assert np.allclose(square_fn(transformed, conditioned=True).final,
                       square_fn(martingale, conditioned=True).final, atol=1e-10)
