import numpy as np
import pytest

from rwre.distributions import DistributionSpec, Situation


@pytest.fixture
def site_mixed_spec():
    return DistributionSpec(
        Situation.SITE,
        atoms=((0.3, 0.25), (0.7, 0.25)),
        uniforms=((0.2, 0.45, 0.25), (0.55, 0.8, 0.25)),
        support_bound=0.19,
    )


@pytest.fixture
def site_noise_spec():
    return DistributionSpec(
        Situation.SITE,
        atoms=((0.5, 0.5),),
        uniforms=((0.21, 0.44, 0.5),),
        support_bound=0.19,
    )


@pytest.fixture
def bond_mixed_spec():
    return DistributionSpec(
        Situation.BOND,
        atoms=((0.6, 0.25), (1.4, 0.25)),
        uniforms=((0.5, 1.5, 0.5),),
        support_bound=0.4,
    )


@pytest.fixture
def bond_noise_spec():
    return DistributionSpec(
        Situation.BOND,
        atoms=((1.0, 0.5),),
        uniforms=((0.5, 2.0, 0.5),),
        support_bound=0.4,
    )


def random_stream(rng, n, situation="site"):
    """Mixture of a small repeated alphabet and unique continuous values,
    mimicking the structure of observation streams."""
    if situation == "site":
        alphabet = np.array([0.3, 0.45, 0.55, 0.7])
        lo, hi = 0.2, 0.8
    else:
        alphabet = np.array([0.6, 1.0, 1.4])
        lo, hi = 0.5, 2.0
    kind = rng.random(n)
    out = np.where(kind < 0.6, rng.choice(alphabet, size=n),
                   lo + (hi - lo) * rng.random(n))
    # plant adjacent repeats so candidate detection has work to do
    for i in rng.integers(0, max(n - 1, 1), size=max(n // 20, 1)):
        out[i + 1] = out[i]
    # plant revisits of continuous values
    idx = rng.integers(0, n, size=max(n // 10, 1))
    out[(idx + rng.integers(1, n, size=idx.size)) % n] = out[idx]
    return out
