"""The pypef command line.

Every command reads its inputs from files, writes JSON or CSV to ``--out``
(or standard output) and exits with 0 on success, 2 on invalid input, 3
when a solver did not converge and 4 when an asserted property failed.
"""

import argparse
import csv
import io
import json
import logging
import sys

from typing import Callable, Dict, Optional, Sequence, Tuple

from . import __version__
from .bell import (
    Behaviour,
    SettingsDistribution,
    SliceCoords,
    chsh_values,
    joint,
    load_behaviour,
    slice_behaviour,
    uniform_settings,
)
from .config import OutputFormat, RunConfig
from .entropy import iid_minentropy_rate, optimal_iid_attack
from .exceptions import (
    PEFException,
    PEFInputException,
    PEFParameterException,
    PEFSolverException,
    PEFVerificationException,
)
from .pef import (
    PefOptConfig,
    best_beta,
    is_valid_pef,
    load_pef,
    model_extremals,
    optimize_pef,
    rate_sweep,
    slice_rate_grid,
    slice_zero_rate_intercept,
)
from .polytope import counterexample_suite, decompose_nonlocal, local_membership, nonlocality_strength
from .protocol import certify, choose_log2_p, file_digest, read_trials, simulate, write_trials

_log = logging.getLogger(__name__)

LOG_FORMAT = '%(levelname)8s  %(asctime)s  [%(module)s|%(lineno)d]  %(message)s'

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_VERIFICATION = 4

Payload = Tuple[object, int]


def _target(config: RunConfig) -> Tuple[Behaviour, SettingsDistribution]:
    """The behaviour file's contents, or the heatmap anchor slice point when none is given."""

    if config.behaviour:
        behaviour, settings = load_behaviour(config.behaviour)
    else:
        anchor, _, _ = config.heatmap_values()
        behaviour, settings = slice_behaviour(SliceCoords(*anchor)), None

    return behaviour, settings or uniform_settings(behaviour.scenario)


def _require(value, flag: str):
    if not value:
        raise PEFParameterException(f"This command needs {flag}.")

    return value


def cmd_rates(config: RunConfig) -> Payload:
    """Optimal and net log-prob rates over the beta grid, with the argmax row per n."""

    behaviour, settings = _target(config)
    counts = config.trial_counts
    rows = rate_sweep(joint(behaviour, settings), config.betas, counts, float(config.epsilon),
                      restarts=int(config.restarts), seed=int(config.seed))

    header = ['kind', 'beta', 'rate'] + [f"net_n{count}" for count in counts]
    table = [['sweep', row.beta, row.rate, *row.net_rates] for row in rows]
    for index, count in enumerate(counts):
        best = best_beta(rows, index)
        table.append([f"argmax_n{count}", best.beta, best.rate, *best.net_rates])
        _log.info("Best beta for n=%s is %s with net rate %s", count, best.beta, best.net_rates[index])

    status = EXIT_OK if all(row.converged for row in rows) else EXIT_SOLVER
    if config.output_format == OutputFormat.CSV:
        return (header, table), status

    return {'columns': header, 'rows': table}, status


def cmd_heatmap(config: RunConfig) -> Payload:
    """Rates of the PEFs optimized at the anchor over the quantum part of the slice."""

    behaviour, settings = _target(config)
    anchor, betas, (s_count, s_prime_count) = config.heatmap_values()
    target = joint(behaviour, settings)
    extremals = model_extremals(settings)

    maps, table, status = [], [], EXIT_OK
    for beta in betas:
        result = optimize_pef(PefOptConfig(beta, target, restarts=int(config.restarts), seed=int(config.seed)),
                              extremals)
        if not result.converged:
            status = EXIT_SOLVER
        grid = slice_rate_grid(result.pef, s_count, s_prime_count, settings)
        intercept = slice_zero_rate_intercept(result.pef, 0.0, settings)
        _log.info("Zero-rate intercept at beta %s: S = %s", beta, intercept)
        maps.append({'beta': beta, 'anchor_rate': result.rate, 'intercept': intercept,
                     'rows': [list(row) for row in grid]})
        table.extend([beta, *row] for row in grid)

    if config.output_format == OutputFormat.CSV:
        return (['beta', 's_prime', 's', 'rate'], table), status

    return {'anchor': {'S': anchor[0], 'S_prime': anchor[1]}, 'maps': maps}, status


def cmd_decompose(config: RunConfig) -> Payload:
    """The PR plus eight LD decomposition of a nonlocal (2,2,2) behaviour."""

    behaviour, _ = _target(config)
    doc = decompose_nonlocal(behaviour).to_dict()
    doc['chsh_values'] = {''.join(str(bit) for bit in bits): value
                          for bits, value in sorted(chsh_values(behaviour).items())}
    doc['nonlocality_strength'] = nonlocality_strength(behaviour)

    return doc, EXIT_OK


def cmd_attack(config: RunConfig) -> Payload:
    """The optimal IID attack reproducing a behaviour."""

    behaviour, settings = _target(config)
    attack = optimal_iid_attack(behaviour, settings, trial_count=config.trial_counts[0])
    doc = attack.to_dict(target_ref=config.behaviour)
    doc['minentropy_avg_per_trial'] = iid_minentropy_rate(attack)
    if attack.decomposition is not None:
        doc['decomposition'] = attack.decomposition.to_dict()

    return doc, EXIT_OK


def cmd_membership(config: RunConfig) -> Payload:
    """Local polytope membership of a behaviour of any scenario."""

    behaviour, _ = _target(config)
    doc = local_membership(behaviour).to_dict()
    doc['scenario'] = str(behaviour.scenario)

    return doc, EXIT_OK


def cmd_certify(config: RunConfig) -> Payload:
    """A min-entropy certificate for a trial file and a PEF file."""

    f = load_pef(_require(config.pef, '--pef'))
    path = _require(config.trials, '--trials')
    if config.scenario_value != f.scenario:
        raise PEFParameterException(f"PEF is defined for scenario {f.scenario}, not {config.scenario_value}.")
    trials = read_trials(path, f.scenario)

    log2_p = config.log2_p
    if log2_p is None:
        behaviour, settings = load_behaviour(_require(config.behaviour, '--p or --behaviour'))
        log2_p = choose_log2_p(f, joint(behaviour, settings or uniform_settings(behaviour.scenario)),
                               len(trials), float(config.epsilon))

    certificate = certify(f, trials, float(config.epsilon), kappa=float(config.kappa), log2_p=log2_p,
                          digest=file_digest(path))
    _log.info("Certificate for %s trials: success %s", certificate.n, certificate.success)

    return certificate.to_dict(), EXIT_OK


def cmd_counterexamples(config: RunConfig) -> Payload:  # pylint: disable=unused-argument
    """Membership verdicts of the counterexample suite in all three scenarios."""

    entries = counterexample_suite()
    doc = {
        'entries': [{'name': entry.name, 'scenario': entry.scenario, 'expected_local': entry.expected_local,
                     'local': entry.local, 'passed': entry.passed} for entry in entries],
        'all_passed': all(entry.passed for entry in entries),
    }

    return doc, EXIT_OK if doc['all_passed'] else EXIT_VERIFICATION


def cmd_simulate(config: RunConfig) -> Payload:
    """Sample trials from a behaviour into a trial CSV."""

    out = _require(config.out, '--out')
    behaviour, settings = _target(config)
    trials = simulate(joint(behaviour, settings), config.trial_counts[0], int(config.seed),
                      workers=int(config.workers))
    write_trials(trials, out, behaviour.scenario)

    return None, EXIT_OK


def cmd_optimize(config: RunConfig) -> Payload:
    """The optimal PEF at one power for a behaviour, as a PEF file."""

    behaviour, settings = _target(config)
    target = joint(behaviour, settings)
    extremals = model_extremals(settings)
    cfg = PefOptConfig(float(config.beta), target, n=max(config.trial_counts[0], 1),
                       epsilon=float(config.epsilon), restarts=int(config.restarts), seed=int(config.seed))
    result = optimize_pef(cfg, extremals)

    doc = result.pef.to_dict(worst_constraint=is_valid_pef(result.pef, extremals).worst_constraint)
    doc.update({
        'rate': result.rate,
        'net_rate': result.net_rate,
        'converged': result.converged,
        'status': result.status,
        'kkt_residual': result.kkt_residual,
        'restart_spread': result.restart_spread,
    })

    return doc, EXIT_OK if result.converged else EXIT_SOLVER


COMMANDS: Dict[str, Callable[[RunConfig], Payload]] = {
    'rates': cmd_rates,
    'heatmap': cmd_heatmap,
    'decompose': cmd_decompose,
    'attack': cmd_attack,
    'membership': cmd_membership,
    'certify': cmd_certify,
    'counterexamples': cmd_counterexamples,
    'simulate': cmd_simulate,
    'optimize': cmd_optimize,
}

# Flag destinations handed to RunConfig
_CONFIG_FLAGS = ('behaviour', 'trials', 'pef', 'out', 'format', 'scenario', 'beta', 'beta_grid', 'n',
                 'epsilon', 'kappa', 'p', 'seed', 'restarts', 'workers')


def render(payload, output_format: OutputFormat) -> str:
    """Serialize a command payload; JSON keys are sorted and CSV floats carry 17 significant digits."""

    if output_format == OutputFormat.JSON:
        return json.dumps(payload, sort_keys=True, indent=2) + '\n'

    header, rows = payload
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(value, '.17g') if isinstance(value, float) else value for value in row])

    return buffer.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--behaviour', metavar='FILE', help="Behaviour JSON file.")
    common.add_argument('--trials', metavar='FILE', help="Trial CSV file.")
    common.add_argument('--pef', metavar='FILE', help="PEF JSON file.")
    common.add_argument('--scenario', metavar='n,m,k', help="Bell scenario.")
    common.add_argument('--beta', type=float, help="PEF power.")
    common.add_argument('--beta-grid', dest='beta_grid', metavar='LO,HI,COUNT', help="Log-spaced power grid.")
    common.add_argument('--n', metavar='N[,N...]', help="Trial count(s).")
    common.add_argument('--epsilon', type=float, help="Error bound.")
    common.add_argument('--kappa', type=float, help="Completeness bound.")
    common.add_argument('--p', metavar='X|2^-K', help="Success threshold.")
    common.add_argument('--seed', type=int, help="Random seed.")
    common.add_argument('--restarts', type=int, help="Optimizer restarts.")
    common.add_argument('--workers', type=int, help="Sampling threads.")
    common.add_argument('--out', metavar='PATH', help="Output file; standard output when omitted.")
    common.add_argument('--format', choices=[fmt.value for fmt in OutputFormat], help="Output format.")
    common.add_argument('--config', metavar='FILE', help="JSON file with default settings.")
    common.add_argument('--verbose', action='store_true', help="Log at debug level.")

    parser = argparse.ArgumentParser(prog='pypef', description="Probability estimation for Bell-test randomness.")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, handler in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=handler.__doc__.splitlines()[0])

    return parser


def configure_logging(verbose: bool):
    """Send pypef log records to standard error in the library's format."""

    logger = logging.getLogger('pypef')
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    if not any(getattr(handler, '_pypef_cli', False) for handler in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._pypef_cli = True  # pylint: disable=protected-access
        logger.addHandler(handler)


def main(argv: Optional[Sequence[str]] = None) -> int:  # pylint: disable=unsubscriptable-object
    """Run one command and return its exit code."""

    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = RunConfig.resolve(args.command, {key: getattr(args, key) for key in _CONFIG_FLAGS}, args.config)
        payload, status = COMMANDS[args.command](config)
        if payload is not None:
            _write(render(payload, config.output_format), config.out)
    except PEFVerificationException as err:
        _log.error("%s", err)
        return EXIT_VERIFICATION
    except PEFSolverException as err:
        _log.error("%s", err)
        return EXIT_SOLVER
    except PEFException as err:
        _log.error("%s", err)
        return EXIT_INPUT

    return status


def _write(text: str, out: Optional[str]):  # pylint: disable=unsubscriptable-object
    if out is None:
        sys.stdout.write(text)
        return

    try:
        with open(out, 'w', newline='') as handle:
            handle.write(text)
    except OSError as err:
        raise PEFInputException(f"Cannot write output: {err}", path=out) from err
