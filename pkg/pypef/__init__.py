"""
Probability estimation for device-independent randomness

pypef builds probability estimation factors (PEFs) for Bell tests, checks
them against the no-signalling model, turns trial records into smooth
min-entropy certificates and synthesizes the IID attacks that bound what
any certificate can achieve. Polytope questions (local membership, the
CHSH simplices, the strength of non-locality) are answered by linear
programming.

usage:
    >>> import pypef
    >>> target = pypef.joint(pypef.slice_behaviour(pypef.SliceCoords(2.6, 0.0)), pypef.uniform_settings())
    >>> result = pypef.optimize_pef(pypef.PefOptConfig(0.01, target))
    >>> trials = pypef.simulate(target, 100000, seed=42)

The ``pypef`` command exposes the same pipelines with file-based I/O.
"""

# pypef Version
__version__ = "0.1.0"

# Export the interface we present to clients

# Scenarios, behaviours and the named boxes
from .bell import (
    CHSH_SCENARIO,
    Behaviour,
    JointDistribution,
    Scenario,
    SettingsDistribution,
    SliceCoords,
    chsh_value,
    chsh_values,
    correlators,
    dump_behaviour,
    joint,
    ld_box,
    ld_enumerate,
    load_behaviour,
    maximally_random,
    mix,
    no_signalling_check,
    ns_extremals,
    pr_box,
    slice_behaviour,
    special_boxes,
    tsirelson_behaviour,
    tv_distance,
    uniform_settings,
)

# Polytope geometry
from .polytope import (
    chsh_simplex,
    counterexample_suite,
    decompose_nonlocal,
    local_membership,
    nonlocality_strength,
    violated_inequality,
)

# Entropies and attacks
from .entropy import (
    AttackModel,
    Conditioning,
    cond_shannon,
    hmin,
    minentropy_avg,
    minentropy_worst,
    optimal_iid_attack,
)

# Probability estimation factors
from .pef import (
    EntropyEstimator,
    Pef,
    PefOptConfig,
    f_k,
    is_valid_pef,
    k_star,
    logprob_rate,
    model_extremals,
    net_logprob_rate,
    optimize_pef,
    pef_from_estimator,
    robustness,
)

# Trials and certificates
from .protocol import (
    Certificate,
    TrialRecord,
    accumulate,
    attack_trace,
    certify,
    choose_log2_p,
    read_trials,
    simulate,
    exact_error_check,
    write_trials,
)

# Import exceptions
from .exceptions import *
