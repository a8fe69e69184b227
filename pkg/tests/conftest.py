import numpy as np
import pytest

from persid import NetworkSpec


def random_net(rng, widths, density=1.0, pow2=False, biases=False) -> NetworkSpec:
    """Random layered network; ``density`` is the fraction of nonzero weights
    and ``pow2=True`` draws magnitudes from exact powers of two (so that
    scaling by any float is lossless)."""
    layers = []
    for a, b in zip(widths[:-1], widths[1:]):
        if pow2:
            w = np.ldexp(1.0, rng.integers(-12, 1, size=(a, b)))
            w *= rng.choice([-1.0, 1.0], size=(a, b))
        else:
            w = rng.standard_normal((a, b))
        if density < 1.0:
            w = w * (rng.random((a, b)) < density)
        layers.append(w)
    if not any(np.abs(w).max() > 0 for w in layers):
        layers[0][0, 0] = 1.0  # keep at least one edge
    bs = tuple(rng.standard_normal(w.shape[1]) for w in layers) if biases else None
    return NetworkSpec(tuple(layers), bs)


def random_widths(rng, max_layers=6, max_units=12, d_range=(2, 8), out_range=(1, 3)):
    n_layers = int(rng.integers(2, max_layers + 1))
    widths = [int(rng.integers(*d_range))]
    widths += [int(rng.integers(1, max_units + 1)) for _ in range(n_layers - 1)]
    widths.append(int(rng.integers(out_range[0], out_range[1] + 1)))
    return widths


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def worked_example_net() -> NetworkSpec:
    """4-2-1 network whose sweep realizes the canonical birth/death chain:
    unit 0 collects features 0,1 (interaction born at the 4th threshold,
    killed by feature 2 at the 7th), unit 1 collects features 2,3."""
    w1 = np.array(
        [
            [0.9, 0.3],
            [0.8, 0.2],
            [0.5, 0.7],
            [0.4, 0.6],
        ]
    )
    w2 = np.array([[1.0], [0.85]])
    return NetworkSpec((w1, w2))
