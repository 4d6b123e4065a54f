import numpy as np
import pytest

from lobmix import ClassCounts, LabeledDataset, exponential_counts

# Exponential profile for 10 classes at imbalance 10, largest class 5000.
# Frozen from an independent evaluation of n_max * rho**(-k/9) with half-up
# rounding; total is 20434.
CIFAR_LT_RHO10 = (5000, 3871, 2997, 2321, 1797, 1391, 1077, 834, 646, 500)


@pytest.fixture(scope="session")
def lt_counts() -> ClassCounts:
    return exponential_counts(5000, 10, 10)


@pytest.fixture(scope="session")
def lt_dataset(lt_counts) -> LabeledDataset:
    """Labels-only dataset with the rho=10 exponential profile."""
    labels = np.repeat(np.arange(10), list(lt_counts))
    return LabeledDataset(np.zeros((labels.size, 1)), labels, 10)


def labels_only_dataset(counts) -> LabeledDataset:
    counts = list(counts)
    labels = np.repeat(np.arange(len(counts)), counts)
    return LabeledDataset(np.zeros((labels.size, 1)), labels, len(counts))
