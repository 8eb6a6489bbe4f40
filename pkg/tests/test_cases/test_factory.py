from functools import partial

import numpy as np
import pytest

from chained_tube_mpc.enums import ControllerType, SolveStatus
from chained_tube_mpc.errors import ValidationError
from chained_tube_mpc.factory import ControllersFactory, controller_factory
from chained_tube_mpc.runtime import run, run_baseline

from tests.parameters.common import WEAK_CHAIN_X0
from tests.plugins.runtime import HORIZON


class TestControllerFactory:
    """Tests for the runner lookup by controller name."""

    @pytest.mark.parametrize("name", [None, "chain", ControllerType.chain])
    def test_chain_runner(self, name):
        """Test the chain of tubes is the default runner."""
        assert controller_factory(name) is run

    @pytest.mark.parametrize("name", ["cmpc", "dempc", "tmpc"])
    def test_baseline_runners(self, name):
        """Test baselines are bound to their name."""
        runner = controller_factory(name)
        assert isinstance(runner, partial)
        assert runner.func is run_baseline
        assert runner.keywords == {"which": ControllerType(name)}

    @pytest.mark.parametrize("name", ["", "mpc", "CHAIN"])
    def test_unknown_controller(self, name):
        """Test unknown names are rejected."""
        with pytest.raises(ValidationError):
            controller_factory(name)


class TestControllersFactory:
    """Tests for closed-loop runs built by the factory."""

    def test_simulate_each_controller(self, weak_chain, weak_design):
        """Test every controller completes on the weak chain and tags its log."""
        factory = ControllersFactory(weak_chain, weak_design, HORIZON, design_hash="weak")
        for controller in ControllerType:
            log = factory.simulate(controller, np.array(WEAK_CHAIN_X0), 4)
            assert log.controller is controller
            assert log.completed
            assert log.design_hash == "weak"
            assert log.horizon == HORIZON

    def test_period_reaches_chain_only(self, weak_chain, weak_design):
        """Test the inner period is passed to the chain of tubes."""
        factory = ControllersFactory(weak_chain, weak_design, HORIZON, period=2)
        log = factory.simulate("chain", np.array(WEAK_CHAIN_X0), 4)
        assert log.period == 2
        assert list(log.statuses[:, 0]) == [
            int(SolveStatus.optimal),
            int(SolveStatus.shifted),
            int(SolveStatus.optimal),
            int(SolveStatus.shifted),
        ]
        baseline = factory.simulate("cmpc", np.array(WEAK_CHAIN_X0), 2)
        assert baseline.period == 1

    def test_matches_direct_run(self, weak_chain, weak_design, chain_log):
        """Test the factory run equals a direct call."""
        factory = ControllersFactory(weak_chain, weak_design, HORIZON, design_hash="weak")
        log = factory.simulate(ControllerType.chain, np.array(WEAK_CHAIN_X0), 20)
        assert np.array_equal(log.states, chain_log.states)
        assert np.array_equal(log.inputs, chain_log.inputs)

    def test_executor(self, weak_chain, weak_design, chain_log, executor):
        """Test concurrent agents give the sequential result."""
        factory = ControllersFactory(weak_chain, weak_design, HORIZON, executor=executor, design_hash="weak")
        log = factory.simulate("chain", np.array(WEAK_CHAIN_X0), 20)
        assert np.array_equal(log.inputs, chain_log.inputs)

    def test_unknown_controller(self, weak_chain, weak_design):
        """Test a bad name fails before running."""
        factory = ControllersFactory(weak_chain, weak_design, HORIZON)
        with pytest.raises(ValueError):
            factory.simulate("mpc", np.array(WEAK_CHAIN_X0), 2)


if __name__ == "__main__":
    pytest.main()
