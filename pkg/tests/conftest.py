import os

# small-matrix workloads: BLAS thread fan-out only adds sync overhead
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import pytest

from powerlaw_hpo.benchmarks import generate_synthetic


@pytest.fixture(scope="session")
def tiny_table():
    """12 configs, 6-step curves; cheap enough for loop-level tests."""
    return generate_synthetic(seed=7, n_configs=12, hp_dim=2, b_max=6)


@pytest.fixture(scope="session")
def small_table():
    """40 configs, 12-step curves; for surrogate/forecast smoke tests."""
    return generate_synthetic(seed=3, n_configs=40, hp_dim=2, b_max=12)
