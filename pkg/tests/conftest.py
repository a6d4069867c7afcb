import json

import numpy as np
import pytest

from src.martingales.filtration import Filtration, martingale_from_final, random_adapted, random_martingale

SMALL_CONFIG = {
    "filtration": "tensor:2x2",
    "classical_filtration": "partition:dyadic:8:3",
    "dims": ["partition:dyadic:8:3", "partition:dyadic:16:4"],
    "stability_instances": 2,
    "instances": 4,
    "seed": 7,
    "workers": 2,
    "search": {"iterations": 20, "restarts": 1},
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tensor_filtration():
    return Filtration.tensor([2, 2, 2])


@pytest.fixture
def dyadic_filtration():
    return Filtration.dyadic(8, 3)


@pytest.fixture
def adapted(tensor_filtration):
    return random_adapted(tensor_filtration, seed=11)


@pytest.fixture
def martingale(tensor_filtration):
    return random_martingale(tensor_filtration, seed=12)


@pytest.fixture
def single_difference(tensor_filtration, rng):
    """Martingale whose only nonzero difference is the first one."""
    head = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    return martingale_from_final(tensor_filtration, np.kron(head, np.eye(4)))


@pytest.fixture
def small_config():
    return json.loads(json.dumps(SMALL_CONFIG))


@pytest.fixture
def config_file(tmp_path, small_config):
    def write(**updates):
        data = dict(small_config)
        data.update(updates)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(data, indent=2))
        return str(path)
    return write
