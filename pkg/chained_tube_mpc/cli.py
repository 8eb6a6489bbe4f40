# chained-tube-mpc - distributed tube model predictive control
# Copyright (C) 2023  OpenWeather
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Command line front end.

``chained-tube-mpc synth|simulate|compare [--config PATH] [flags]``

Exit codes: 0 success, 1 usage or configuration error, 2 synthesis
failure, 3 infeasibility during a run.
"""

import argparse
import logging
import sys

from pathlib import Path
from typing import Callable, Dict, List, NoReturn, Optional, Tuple

from chained_tube_mpc.config import RunConfig
from chained_tube_mpc.enums import ControllerType
from chained_tube_mpc.errors import FatalInfeasible, StorageError, SynthesisFailure, ValidationError
from chained_tube_mpc.factory import ControllersFactory
from chained_tube_mpc.log import set_logging_level
from chained_tube_mpc.model import CoupledSystem, build_chain
from chained_tube_mpc.report import ComparisonReport
from chained_tube_mpc.runtime import SimLog
from chained_tube_mpc.storage_adapters.csv_adapter import CSVLogAdapter
from chained_tube_mpc.storage_adapters.hdf5.hdf5_storage_adapter import HDF5DesignCache, HDF5SimLogArchive
from chained_tube_mpc.synthesis import TubeDesign, synthesize


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SYNTHESIS = 2
EXIT_INFEASIBLE = 3

REPORT_FILE = "report.md"
SYNTHESIS_REPORT_FILE = "synthesis_report.txt"

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    """Parser with the ``synth``, ``simulate`` and ``compare`` subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON run config")
    common.add_argument(
        "--controller", choices=[c.value for c in ControllerType], default=None, help="controller to simulate"
    )
    common.add_argument("--steps", type=int, default=None, help="number of closed-loop steps")
    common.add_argument("--horizon", type=int, default=None, help="prediction horizon N")
    common.add_argument("--period", type=int, default=None, help="inner re-solve period T")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--loglevel", default="ERROR", help="logging level")

    parser = _Parser(prog="chained-tube-mpc", description="Distributed chain-of-tubes MPC benchmark.")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands.add_parser("synth", parents=[common], help="synthesize and validate the tube design")
    commands.add_parser("simulate", parents=[common], help="run one controller and write its log")
    commands.add_parser("compare", parents=[common], help="run all controllers and write the cost report")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then the flags.

    :param args: parsed arguments
    """
    config = RunConfig.load(args.config) if args.config is not None else RunConfig()
    return config.with_overrides(
        controller=args.controller, steps=args.steps, horizon=args.horizon, period=args.period, out=args.out
    )


def obtain_design(config: RunConfig) -> Tuple[CoupledSystem, TubeDesign]:
    """Load the design from the cache or synthesize and cache it.

    :param config: run config
    """
    system = build_chain(config.model)
    cache = HDF5DesignCache(config.out)
    design_hash = config.design_hash
    if cache.exists(design_hash):
        try:
            design = cache.load(design_hash, system)
            logger.info(f"design {design_hash[:12]} loaded from {cache.path(design_hash)}")
            return system, design
        except StorageError as e:
            logger.warning(f"cached design unusable, synthesizing again: {e}")
    design = synthesize(system, config.synthesis)
    cache.save(design, design_hash, config.model)
    return system, design


def _write_log(config: RunConfig, log: SimLog) -> Path:
    path = CSVLogAdapter(config.out).write(log)
    HDF5SimLogArchive(config.out, config.archive).write(log)
    return path


def _summary(log: SimLog) -> str:
    feasible = "feasible" if log.completed else "infeasible"
    return (
        f"{log.controller.value}: {feasible}, steps {len(log)}/{log.steps}, "
        f"total cost {log.total_cost:.6f}, final |x|_inf {log.final_norm:.6g}"
    )


def cmd_synth(config: RunConfig) -> int:
    """Synthesize the design, cache it and write the check report.

    :param config: run config
    """
    try:
        _, design = obtain_design(config)
    except SynthesisFailure as e:
        print(f"synthesis failed: {e}")
        return EXIT_SYNTHESIS
    text = design.report.to_text()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / SYNTHESIS_REPORT_FILE).write_text(text + "\n", encoding="utf-8")
    print(text)
    print(f"design {config.design_hash} cached in {HDF5DesignCache(config.out).path(config.design_hash)}")
    return EXIT_OK if design.report.passed else EXIT_SYNTHESIS


def cmd_simulate(config: RunConfig) -> int:
    """Run the configured controller and write its CSV log.

    :param config: run config
    """
    try:
        system, design = obtain_design(config)
    except SynthesisFailure as e:
        print(f"synthesis failed: {e}")
        return EXIT_SYNTHESIS
    factory = ControllersFactory(system, design, config.horizon, config.period, design_hash=config.design_hash)
    try:
        log = factory.simulate(config.controller, config.x0_array, config.steps)
    except FatalInfeasible as e:
        if e.log is not None:
            _write_log(config, e.log)
        print(f"{e} (t={e.t}, subsystem {e.i + 1})")
        return EXIT_INFEASIBLE
    path = _write_log(config, log)
    print(_summary(log))
    print(f"log written to {path}")
    return EXIT_OK


def cmd_compare(config: RunConfig) -> int:
    """Run every controller from the same initial state and write the report.

    :param config: run config
    """
    try:
        system, design = obtain_design(config)
    except SynthesisFailure as e:
        print(f"synthesis failed: {e}")
        return EXIT_SYNTHESIS
    factory = ControllersFactory(system, design, config.horizon, config.period, design_hash=config.design_hash)
    report = ComparisonReport()
    for controller in ControllerType:
        try:
            log = factory.simulate(controller, config.x0_array, config.steps)
            report.add(log)
        except FatalInfeasible as e:
            if e.log is None:
                raise e
            report.add(e.log, str(e))
        _write_log(config, report.logs[controller])
        print(_summary(report.logs[controller]))
    text = report.to_markdown()
    out = Path(config.out)
    (out / REPORT_FILE).write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK if report.complete(ControllerType.chain) else EXIT_INFEASIBLE


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "synth": cmd_synth,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the exit code.

    :param argv: arguments without the program name
    """
    args = build_parser().parse_args(argv)
    try:
        set_logging_level(args.loglevel)
    except ValueError:
        print(f"unknown log level {args.loglevel!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = load_config(args)
    except ValidationError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](config)
    except ValidationError as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
