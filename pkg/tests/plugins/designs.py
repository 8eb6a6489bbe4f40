from typing import Union

import pytest

from chained_tube_mpc.config import SynthesisOptions
from chained_tube_mpc.errors import SynthesisFailure
from chained_tube_mpc.model import CoupledSystem
from chained_tube_mpc.synthesis import TubeDesign, synthesize


Outcome = Union[TubeDesign, SynthesisFailure]


def synthesis_outcome(system: CoupledSystem, options: SynthesisOptions) -> Outcome:
    """The design, or the failure naming the check it stopped at.

    :param system: coupled system
    :param options: synthesis options
    """
    try:
        return synthesize(system, options)
    except SynthesisFailure as e:
        return e


@pytest.fixture(scope="session")
def weak_design(weak_chain: CoupledSystem, weak_chain_options: SynthesisOptions) -> TubeDesign:
    """Validated design of the weak chain."""
    return synthesize(weak_chain, weak_chain_options)


@pytest.fixture(scope="session")
def planar_design(planar_chain: CoupledSystem, weak_chain_options: SynthesisOptions) -> TubeDesign:
    """Validated design of the chain of two-state subsystems."""
    return synthesize(planar_chain, weak_chain_options)


@pytest.fixture(scope="session")
def one_truck_design(one_truck: CoupledSystem) -> TubeDesign:
    """Validated design of the isolated truck."""
    return synthesize(one_truck, SynthesisOptions())


@pytest.fixture(scope="session")
def four_trucks_synthesis(four_trucks: CoupledSystem) -> Outcome:
    """Benchmark design with default weights, or the failure naming the violated check."""
    return synthesis_outcome(four_trucks, SynthesisOptions())
