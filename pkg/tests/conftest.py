import numpy as np
import pytest

from cfofdm.network import SimulationLayout
from cfofdm.phase_noise import KernelParams, PnParams


@pytest.fixture
def small_layout():
    """Tiny layout: N=16, two blocks, pilots on subcarrier 0 of symbols 1-2."""
    return SimulationLayout(
        n_subcarriers=16,
        cp_len=2,
        subcarrier_spacing=15e3,
        block_subcarriers=8,
        block_symbols=3,
        pilot_subcarriers=(0,),
        pilot_symbols=(1, 2),
        n_aps=2,
        n_ues=2,
        area_side=200.0,
    )


@pytest.fixture
def ci_layout():
    """Reduced-scale layout used for the statistical checks."""
    return SimulationLayout(
        n_subcarriers=120,
        cp_len=8,
        subcarrier_spacing=15e3,
        block_subcarriers=12,
        block_symbols=5,
        pilot_subcarriers=(0,),
        pilot_symbols=(1, 2, 3, 4),
        n_aps=30,
        n_ues=5,
        area_side=1000.0,
    )


@pytest.fixture
def kernel_params_64():
    return KernelParams(n=64, sigma2_tot=7e-4, stride=64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
