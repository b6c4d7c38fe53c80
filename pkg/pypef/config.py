"""Run configuration for the pypef command line."""

import json
import logging
import math
import re

from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .bell import Scenario
from .exceptions import PEFInputException, PEFParameterException

_log = logging.getLogger(__name__)

_POWER_OF_TWO = re.compile(r'^\s*2\s*(?:\^|\*\*)\s*\(?\s*(-?\d+(?:\.\d*)?)\s*\)?\s*$')


class OutputFormat(Enum):  # pylint: disable=R0903
    """Defines output file formats."""

    CSV = 'csv'
    JSON = 'json'


DEFAULTS = {
    'behaviour': None,
    'trials': None,
    'pef': None,
    'out': None,
    'format': None,
    'scenario': '2,2,2',
    'beta': 0.01,
    'beta_grid': '1e-3,1e-1,200',
    'n': '150000,240000',
    'epsilon': 1e-4,
    'kappa': 1.0,
    'p': None,
    'seed': 42,
    'restarts': 10,
    'workers': 1,
    'heatmap_anchor': (2.6, 0.0),
    'heatmap_betas': (0.1, 0.01),
    'heatmap_grid': (41, 81),
}


def parse_log2_p(text) -> Optional[float]:  # pylint: disable=unsubscriptable-object
    """log2 of a success threshold given as a number or as ``2^-K``.

    Raises:
        PEFParameterException: The value is neither form or is not positive.
    """

    if text is None:
        return None
    if isinstance(text, (int, float)):
        value = float(text)
    else:
        match = _POWER_OF_TWO.match(str(text))
        if match:
            return float(match.group(1))
        try:
            value = float(text)
        except ValueError as err:
            raise PEFParameterException(f"p must be a number or 2^-K, got {text!r}.") from err

    if not value > 0:
        raise PEFParameterException("p must be positive.")

    return math.log2(value)


def _int_list(value, name) -> Tuple[int, ...]:
    try:
        if isinstance(value, str):
            items = tuple(int(float(item)) for item in value.split(','))
        elif isinstance(value, (int, float)):
            items = (int(value),)
        else:
            items = tuple(int(item) for item in value)
    except (TypeError, ValueError) as err:
        raise PEFParameterException(f"{name} must be a list of integers, got {value!r}.") from err

    return items


class RunConfig:
    """Parameters of one command line run.

    Args:
        command (str): The subcommand.
        **values: Any key of ``DEFAULTS``; missing keys take their default.

    Use ``RunConfig.resolve`` to merge flags, a JSON config file and the
    defaults.
    """

    def __init__(self, command: str, **values):

        unknown = set(values) - set(DEFAULTS)
        if unknown:
            raise PEFParameterException(f"Unknown configuration keys: {', '.join(sorted(unknown))}.")

        self.command = command
        merged = dict(DEFAULTS)
        merged.update(values)

        self.behaviour = merged['behaviour']
        self.trials = merged['trials']
        self.pef = merged['pef']
        self.out = merged['out']
        self.format = merged['format']
        self.scenario = merged['scenario']
        self.beta = merged['beta']
        self.beta_grid = merged['beta_grid']
        self.n = merged['n']
        self.epsilon = merged['epsilon']
        self.kappa = merged['kappa']
        self.p = merged['p']
        self.seed = merged['seed']
        self.restarts = merged['restarts']
        self.workers = merged['workers']
        self.heatmap_anchor = merged['heatmap_anchor']
        self.heatmap_betas = merged['heatmap_betas']
        self.heatmap_grid = merged['heatmap_grid']

    @classmethod
    def resolve(cls, command: str, flags: dict, config_path: Optional[str] = None) -> 'RunConfig':  # pylint: disable=unsubscriptable-object
        """Merge settings with precedence flags, then config file, then defaults.

        Flags whose value is None are treated as not given.

        Raises:
            PEFInputException: The config file cannot be read.
            PEFParameterException: A setting is invalid.
        """

        values = {}
        if config_path:
            values.update(cls._read_file(config_path))
        values.update({key: value for key, value in flags.items() if value is not None})

        config = cls(command, **values)
        config.validate()
        _log.debug("Resolved configuration for %s: %s", command, values)

        return config

    @staticmethod
    def _read_file(path: str) -> dict:
        try:
            with open(path, 'r') as handle:
                doc = json.load(handle)
        except (OSError, ValueError) as err:
            raise PEFInputException(f"Cannot read config file: {err}", path=path) from err

        if not isinstance(doc, dict):
            raise PEFInputException("Config file must hold a JSON object.", path=path)

        return {key.replace('-', '_'): value for key, value in doc.items()}

    @property
    def scenario_value(self) -> Scenario:
        if isinstance(self.scenario, Scenario):
            return self.scenario
        if isinstance(self.scenario, (list, tuple)):
            return Scenario(*self.scenario)
        try:
            return Scenario.parse(str(self.scenario))
        except PEFInputException as err:
            raise PEFParameterException(err.message) from err

    @property
    def trial_counts(self) -> Tuple[int, ...]:
        """Planned trial counts; sweeps report one net rate per entry."""

        counts = _int_list(self.n, 'n')
        if not counts or any(count < 0 for count in counts):
            raise PEFParameterException("n must be nonnegative integers.")

        return counts

    @property
    def betas(self) -> np.ndarray:
        """The sweep grid from ``beta_grid`` given as ``LO,HI,COUNT``."""

        grid = self.beta_grid
        try:
            parts = grid.split(',') if isinstance(grid, str) else list(grid)
            low, high, count = float(parts[0]), float(parts[1]), int(float(parts[2]))
        except (IndexError, TypeError, ValueError) as err:
            raise PEFParameterException(f"beta grid must be LO,HI,COUNT, got {grid!r}.") from err

        if not 0 < low < high or count < 2:
            raise PEFParameterException("beta grid needs 0 < LO < HI and COUNT >= 2.")

        return np.geomspace(low, high, count)

    @property
    def log2_p(self) -> Optional[float]:  # pylint: disable=unsubscriptable-object
        return parse_log2_p(self.p)

    @property
    def output_format(self) -> OutputFormat:
        """The explicit format, else the output file's extension, else JSON.

        Raises:
            PEFParameterException: The format is not csv or json.
        """

        chosen = self.format
        if chosen is None and self.out and str(self.out).lower().endswith('.csv'):
            chosen = 'csv'
        try:
            return OutputFormat(chosen or 'json')
        except ValueError as err:
            raise PEFParameterException(f"Unknown output format {chosen!r}.") from err

    def heatmap_values(self) -> Tuple[Tuple[float, float], Sequence[float], Tuple[int, int]]:
        anchor = tuple(float(value) for value in self.heatmap_anchor)
        betas = tuple(float(value) for value in self.heatmap_betas)
        grid = _int_list(self.heatmap_grid, 'heatmap_grid')
        if len(anchor) != 2 or len(grid) != 2 or min(grid) < 2 or not all(beta > 0 for beta in betas):
            raise PEFParameterException("Heatmap needs an (S, S') anchor, positive betas and a grid of two sizes.")

        return anchor, betas, (grid[0], grid[1])

    def validate(self):
        """Check every numeric setting against the ranges the library accepts.

        Raises:
            PEFParameterException: A setting is out of range.
        """

        try:
            beta, epsilon, kappa = float(self.beta), float(self.epsilon), float(self.kappa)
            restarts, workers, seed = int(self.restarts), int(self.workers), int(self.seed)
        except (TypeError, ValueError) as err:
            raise PEFParameterException(f"Invalid numeric setting: {err}") from err

        if not beta > 0:
            raise PEFParameterException("beta must be positive.")
        if not 0 < epsilon < 1:
            raise PEFParameterException("epsilon must lie in (0, 1).")
        if not 0 < kappa <= 1:
            raise PEFParameterException("kappa must lie in (0, 1].")
        if restarts < 1 or workers < 1:
            raise PEFParameterException("restarts and workers must be positive integers.")
        if seed < 0:
            raise PEFParameterException("seed must be a nonnegative integer.")

        # Each property raises on an invalid value
        _ = (self.scenario_value, self.trial_counts, self.betas, self.log2_p, self.output_format)
        self.heatmap_values()
