import numpy as np
import pytest

from passopt import Placement, TransmitBeam, make_scenario


def random_scenario(rng, n_users=2, pas_per_waveguide=4, **kwargs):
    users = np.stack([rng.uniform(0.0, kwargs.get("span_x", 20.0), n_users),
                      rng.uniform(0.0, kwargs.get("span_y", 10.0), n_users)],
                     axis=1)
    return make_scenario(users, pas_per_waveguide=pas_per_waveguide, **kwargs)


def random_placement(rng, scenario):
    """Feasible placement drawn by sorting uniform draws and enforcing gaps."""
    n, l = scenario.n_waveguides, scenario.pas_per_waveguide
    x = np.sort(rng.uniform(0.0, scenario.span_x, (n, l)), axis=1)
    for j in range(1, l):
        x[:, j] = np.maximum(x[:, j], x[:, j - 1] + scenario.min_spacing)
    # fold back anything pushed beyond the waveguide end
    overflow = np.maximum(x[:, -1] - scenario.span_x, 0.0)
    x -= overflow[:, None]
    return Placement(x)


def random_beam(rng, scenario, power_fraction=1.0):
    shape = (scenario.n_waveguides, scenario.n_users)
    d = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    d *= np.sqrt(power_fraction * scenario.max_power / np.sum(np.abs(d) ** 2))
    return TransmitBeam(d)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
