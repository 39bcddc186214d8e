"""Shared test fixtures for edgereg."""
import os

import numpy as np
import pytest


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    """Keep EDGEREG_* variables and stray .env files out of every test."""
    for key in [k for k in os.environ if k.startswith("EDGEREG_")]:
        monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)
    yield
    # python-dotenv writes straight into os.environ
    for key in [k for k in os.environ if k.startswith("EDGEREG_")]:
        os.environ.pop(key, None)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_sparse(rng):
    """Factory for random sparse CSR matrices with roughly ``density`` fill."""
    import scipy.sparse as sp
    from edgereg.sparse import as_csr

    def make(n_rows, n_cols, density=0.4):
        return as_csr(sp.random(n_rows, n_cols, density=density, random_state=rng, format="csr"))
    return make


@pytest.fixture
def laplacian_1d():
    """Dirichlet tridiag(−1, 2, −1) of size n."""
    import scipy.sparse as sp
    from edgereg.sparse import as_csr

    def make(n):
        return as_csr(sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n)))
    return make


@pytest.fixture(scope="session")
def blur_problem_16():
    from edgereg.problems import build_problem
    return build_problem("blur", 16, noise=0.01, seed=0)


@pytest.fixture(scope="session")
def tomo_problem_16():
    from edgereg.problems import build_problem
    return build_problem("tomo_full", 16, noise=0.01, seed=0)


@pytest.fixture
def run_config():
    """Small, fast configuration for driver and CLI tests."""
    from edgereg.config import RunConfig
    return RunConfig(lambda_hi_exp=1.0, lambda_lo_exp=-3.0, lambda_count=14,
                     max_outer=4, max_iter=80, max_coarse=60)


@pytest.fixture
def problem_dir(tmp_path, blur_problem_16):
    from edgereg.artifacts import write_problem
    return write_problem(tmp_path / "blur16", blur_problem_16)
