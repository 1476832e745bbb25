"""Analog federated learning over a noisy fading multiple-access channel.

A numpy simulation library for over-the-air model aggregation: a splitting
algorithm whose devices upload local models through a fading MAC with
channel-inversion precoding and threshold device selection, gradient-descent
baselines over the identical channel, analytical convergence bounds, and a
seeded experiment harness.
"""

from .algorithms import (
    ALGORITHMS,
    FedSplitState,
    GdState,
    ProxOperator,
    RoundRecord,
    TrialTrace,
    default_rate,
    default_step,
    fedsplit_local_update,
    fedsplit_round,
    gbma_round,
    rounds_until_gap,
    run_algorithm,
)
from .channel import (
    DEFERRED,
    ERROR_FREE,
    ChannelParams,
    ChannelRound,
    Deferred,
    ErrorFree,
    RecoveredModel,
    draw_fading,
    draw_fading_above,
    equivalent_noise_norm_expect,
    mac_superpose,
    precode,
    recover,
    scaling_factor,
    select_devices,
    select_top_b,
    transmit_round,
)
from .harness import (
    AggregateResult,
    ExperimentConfig,
    emit_csv,
    emit_plotdata,
    load_config,
    replay_trial,
    run_experiment,
    sweep_kappa,
)
from .linalg import complex_gaussian, extreme_eigs, spd_solve
from .problems import (
    DeviceProblem,
    FederatedProblem,
    GenConfig,
    fixed_points,
    gen_design_ill,
    gen_design_well,
    gen_problem,
    global_loss,
    global_optimum,
    gradient,
    load_problem,
    loss,
    optimality_gap,
    prox,
    save_problem,
)
from .theory import (
    BoundInputs,
    contraction_factor,
    iteration_complexity,
    measure_g,
    theorem1_bound,
    theorem2_bound,
)
from .validation import SUITES, ValidationReport, validate

__version__ = "0.1.0"
