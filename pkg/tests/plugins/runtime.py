from typing import Dict

import numpy as np
import pytest

from chained_tube_mpc.model import CoupledSystem
from chained_tube_mpc.runtime import SimLog, run, run_baseline
from chained_tube_mpc.synthesis import TubeDesign

from tests.parameters.common import PLANAR_CHAIN_X0, WEAK_CHAIN_X0


HORIZON = 5
BASELINES = ("cmpc", "dempc", "tmpc")


@pytest.fixture(scope="session")
def chain_log(weak_chain: CoupledSystem, weak_design: TubeDesign) -> SimLog:
    """Twenty steps of the chain of tubes on the weak chain."""
    return run(weak_chain, weak_design, np.array(WEAK_CHAIN_X0), steps=20, N=HORIZON, design_hash="weak")


@pytest.fixture(scope="session")
def cmpc_log(weak_chain: CoupledSystem, weak_design: TubeDesign) -> SimLog:
    """Twenty steps of the centralized baseline on the weak chain."""
    return run_baseline(weak_chain, weak_design, np.array(WEAK_CHAIN_X0), 20, HORIZON, "cmpc", design_hash="weak")


@pytest.fixture(scope="session")
def dempc_log(weak_chain: CoupledSystem, weak_design: TubeDesign) -> SimLog:
    """Twenty steps of the decentralized nominal baseline on the weak chain."""
    return run_baseline(weak_chain, weak_design, np.array(WEAK_CHAIN_X0), 20, HORIZON, "dempc", design_hash="weak")


@pytest.fixture(scope="session")
def tmpc_log(weak_chain: CoupledSystem, weak_design: TubeDesign) -> SimLog:
    """Twenty steps of the decentralized tube baseline on the weak chain."""
    return run_baseline(weak_chain, weak_design, np.array(WEAK_CHAIN_X0), 20, HORIZON, "tmpc", design_hash="weak")


@pytest.fixture(scope="session")
def planar_log(planar_chain: CoupledSystem, planar_design: TubeDesign) -> SimLog:
    """Thirty steps of the chain of tubes on the chain of two-state subsystems."""
    return run(planar_chain, planar_design, np.array(PLANAR_CHAIN_X0), steps=30, N=HORIZON, design_hash="planar")


@pytest.fixture(scope="session")
def planar_baseline_logs(planar_chain: CoupledSystem, planar_design: TubeDesign) -> Dict[str, SimLog]:
    """Thirty steps of every baseline on the chain of two-state subsystems."""
    x0 = np.array(PLANAR_CHAIN_X0)
    return {which: run_baseline(planar_chain, planar_design, x0, 30, HORIZON, which) for which in BASELINES}
