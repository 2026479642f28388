import sys
from pathlib import Path

import pytest

from boxen import Prior, ProblemConfig

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def prior():
    return Prior.bernoulli()


@pytest.fixture
def fig1():
    """Reference regime at lambda2 = 0.5 (SNR 0.5 -> sigma_z2 = 0.2)."""
    return ProblemConfig(delta=0.7, kappa=0.1, eps2=0.1, sigma_z2=0.2, lambda1=0.1, lambda2=0.5, l=0.0, u=1.0, xi=1e-3)


@pytest.fixture
def fig1_file(tmp_path):
    path = tmp_path / "fig1.cfg"
    path.write_text(
        "# reference regime\n"
        "delta = 0.7\nkappa = 0.1\neps2 = 0.1\nsnr = 0.5\n"
        "lambda1 = 0.1\nlambda2 = 0.5\nl = 0\nu = 1\nxi = 1e-3\n"
        "prior.atoms = [(1.0, 1.0)]\n"
    )
    return path
