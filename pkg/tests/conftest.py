import numpy as np
import pytest

from alloyopt.dataset import AlloyRecord, Dataset
from alloyopt.features import Composition, compute_features
from alloyopt.registry import (
    ElementRecord,
    MixingEnthalpyTable,
    Registry,
    default_registry,
    subset_registry,
)

TEN_ELEMENTS = ("Ni", "Ti", "Hf", "Zr", "Cu", "Al", "Fe", "Nb", "Co", "Mn")
EIGHT_ELEMENTS = ("Ni", "Ti", "Hf", "Zr", "Cu", "Al", "Fe", "Nb")


@pytest.fixture(scope="session")
def reg39():
    return default_registry()


@pytest.fixture(scope="session")
def reg10(reg39):
    return subset_registry(reg39, TEN_ELEMENTS)


@pytest.fixture(scope="session")
def reg8(reg39):
    return subset_registry(reg39, EIGHT_ELEMENTS)


@pytest.fixture(scope="session")
def reg3():
    """Hand-written 3-element registry for arithmetic oracles."""
    elements = (
        ElementRecord("Aa", 10, 4, 1.50, 1.60, 0.050, 5000.0, 2, 10.0),
        ElementRecord("Bb", 20, 6, 1.20, 2.00, 0.100, 8000.0, 4, 40.0),
        ElementRecord("Cc", 30, 8, 1.80, 1.20, 0.150, 9000.0, 2, 5.0),
    )
    h = np.array(
        [
            [0.0, -30.0, 12.0],
            [-30.0, 0.0, -7.5],
            [12.0, -7.5, 0.0],
        ]
    )
    return Registry(elements=elements, enthalpy=MixingEnthalpyTable(values=h))


def random_compositions(n_comps, n_elements, rng, sparsity=0.0):
    """Dirichlet draws scaled to percent; optionally zero out components."""
    out = []
    for _ in range(n_comps):
        x = rng.dirichlet(np.ones(n_elements)) * 100.0
        if sparsity > 0.0:
            mask = rng.random(n_elements) < sparsity
            if mask.all():
                mask[rng.integers(n_elements)] = False
            x[mask] = 0.0
            x *= 100.0 / x.sum()
        out.append(x)
    return out


def make_dataset(reg, compositions, temperatures):
    records = []
    for x, t in zip(compositions, temperatures):
        comp = Composition(np.asarray(x, dtype=float))
        records.append(
            AlloyRecord(
                composition=comp,
                features=compute_features(comp, reg),
                ms_temperature=float(t),
            )
        )
    return Dataset(records=tuple(records))


# fixed standardization constants for the synthetic ground truth; chosen
# once so the target function is the same analytic map in every test
GROUND_TRUTH_OFFSET = np.array([-8.0, 2.6e-10, 0.35, 1.45, 0.08, 1.75, 0.10])
GROUND_TRUTH_SCALE = np.array([6.0, 3.0e-11, 0.12, 0.08, 0.04, 0.12, 0.05])


def ground_truth_temperature(y):
    """Smooth analytic Ms ground truth used by the synthetic experiments."""
    z = (np.asarray(y, dtype=float) - GROUND_TRUTH_OFFSET) / GROUND_TRUTH_SCALE
    return (
        120.0
        + 45.0 * np.tanh(z[0])
        - 30.0 * z[2]
        + 20.0 * z[4]
        + 8.0 * z[0] * z[2] / (1.0 + z[0] ** 2)
        - 6.0 * np.tanh(z[5]) ** 2
    )


def synthetic_dataset(reg, n_rows, seed, noise_sd=5.0, sparsity=0.35):
    """Random alloys over reg with ground-truth temperatures plus noise."""
    rng = np.random.default_rng(seed)
    comps = random_compositions(n_rows, reg.n, rng, sparsity=sparsity)
    temps = []
    for x in comps:
        y = compute_features(Composition(x), reg).as_array()
        temps.append(ground_truth_temperature(y) + rng.normal(0.0, noise_sd))
    return make_dataset(reg, comps, temps)
