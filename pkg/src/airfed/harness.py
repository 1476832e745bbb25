"""Experiment orchestration: configs, seeded multi-trial runs, file outputs.

Configuration lives in INI files (see README for the full grammar).  A run
executes ``trials`` independent seeded trials, averages the per-round
optimality gaps, and writes ``result.csv``, ``plot.dat`` and ``summary.txt``
into the output directory.  Everything is a pure function of the
configuration and the seed: repeating a run produces byte-identical files.

Seed derivation: trial ``i`` uses ``seed XOR i``.  When the problem instance
is shared across trials it is drawn from ``seed XOR 0x9E3779B97F4A7C15`` so
the problem stream never collides with a trial stream.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .algorithms import ALGORITHMS, TrialTrace, default_step, run_algorithm
from .channel import ERROR_FREE, ChannelParams
from .errors import ConfigError
from .problems import FederatedProblem, GenConfig, gen_problem
from .theory import BoundInputs, theorem1_bound, theorem2_bound

PROBLEM_SEED_SALT = 0x9E3779B97F4A7C15


def trial_seed(seed: int, index: int) -> int:
    """Seed of trial ``index``: ``seed XOR index``."""
    return seed ^ index


def problem_seed(seed: int) -> int:
    """Seed of a shared problem instance (kept off the trial streams)."""
    return seed ^ PROBLEM_SEED_SALT


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description."""

    gen: GenConfig
    chan: ChannelParams
    error_free: bool
    algo: str
    step_size: float | None      # None means the analytical default
    learning_rate: float | None  # None means the analytical default
    local_steps: int
    rounds: int
    trials: int
    seed: int
    output_dir: str
    dump_trials: bool = False
    problem_shared: bool = False

    def validate(self) -> None:
        try:
            self.gen.validate()
        except ValueError as exc:
            raise ConfigError(f"[problem] {exc}") from exc
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algo!r}")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.local_steps < 1:
            raise ConfigError("local_steps must be >= 1")


_DEFAULTS = {
    ("problem", "devices"): "100",
    ("problem", "samples_per_device"): "200",
    ("problem", "dim"): "6",
    ("problem", "data_noise_var"): "0.25",
    ("problem", "conditioning"): "well",
    ("problem", "kappa"): "",
    ("problem", "shared_across_trials"): "false",
    ("channel", "error_free"): "false",
    ("channel", "noise_var"): "1.0",
    ("channel", "threshold"): "0.5",
    ("channel", "selection"): "threshold",
    ("channel", "top_b"): "",
    ("algorithm", "name"): "fedsplit",
    ("algorithm", "step_size"): "auto",
    ("algorithm", "learning_rate"): "auto",
    ("algorithm", "local_steps"): "1",
    ("run", "trials"): "20",
    ("run", "seed"): "1",
    ("run", "output_dir"): "out",
    ("run", "dump_trials"): "false",
}

# keys the file must provide explicitly (no safe default exists)
_REQUIRED = (("channel", "max_power"), ("run", "rounds"))


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse an INI experiment file, applying CLI overrides on top.

    Precedence is override > file > built-in default.  ``max_power`` and
    ``rounds`` have no defaults and must appear in the file (or overrides).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    def get(section: str, key: str) -> str:
        if overrides and (section, key) in overrides:
            return str(overrides[(section, key)])
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        if (section, key) in _DEFAULTS:
            return _DEFAULTS[(section, key)]
        raise ConfigError(f"missing required config key [{section}] {key}")

    for section, key in _REQUIRED:
        has_override = overrides and (section, key) in overrides
        if not has_override and not parser.has_option(section, key):
            raise ConfigError(f"config must set [{section}] {key}")

    def as_float(section, key):
        raw = get(section, key)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}") from exc

    def as_int(section, key):
        raw = get(section, key)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}") from exc

    def as_bool(section, key):
        raw = get(section, key).lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key} must be a boolean, got {raw!r}")

    conditioning = get("problem", "conditioning").lower()
    kappa_raw = get("problem", "kappa")
    gen = GenConfig(
        n_devices=as_int("problem", "devices"),
        samples_per_device=as_int("problem", "samples_per_device"),
        dim=as_int("problem", "dim"),
        data_noise_var=as_float("problem", "data_noise_var"),
        conditioning=conditioning,
        kappa_target=float(kappa_raw) if kappa_raw else None,
    )

    selection = get("channel", "selection").lower()
    top_b_raw = get("channel", "top_b")
    try:
        chan = ChannelParams(
            noise_var=as_float("channel", "noise_var"),
            threshold=as_float("channel", "threshold"),
            max_power=as_float("channel", "max_power"),
            selection=selection,
            top_b=int(top_b_raw) if top_b_raw else None,
        )
    except ValueError as exc:
        raise ConfigError(f"[channel] {exc}") from exc

    step_raw = get("algorithm", "step_size").lower()
    rate_raw = get("algorithm", "learning_rate").lower()
    cfg = ExperimentConfig(
        gen=gen,
        chan=chan,
        error_free=as_bool("channel", "error_free"),
        algo=get("algorithm", "name").lower(),
        step_size=None if step_raw in ("", "auto") else float(step_raw),
        learning_rate=None if rate_raw in ("", "auto") else float(rate_raw),
        local_steps=as_int("algorithm", "local_steps"),
        rounds=as_int("run", "rounds"),
        trials=as_int("run", "trials"),
        seed=as_int("run", "seed"),
        output_dir=get("run", "output_dir"),
        dump_trials=as_bool("run", "dump_trials"),
        problem_shared=as_bool("problem", "shared_across_trials"),
    )
    cfg.validate()
    return cfg


@dataclass
class AggregateResult:
    """Trial-averaged curves plus the bound overlays when they apply."""

    label: str
    rounds: np.ndarray
    mean_gap: np.ndarray
    min_gap: np.ndarray
    max_gap: np.ndarray
    mean_selected: np.ndarray
    mean_alpha: np.ndarray
    thm1_bound: np.ndarray | None = None
    thm2_as_stated: np.ndarray | None = None
    thm2_as_proved: np.ndarray | None = None
    kappas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    delta0s: np.ndarray = field(default_factory=lambda: np.zeros(0))
    g_measured: float = 0.0
    traces: list[TrialTrace] = field(default_factory=list, repr=False)

    @property
    def final_mean_gap(self) -> float:
        return float(self.mean_gap[-1])


def _run_one_trial(cfg: ExperimentConfig, index: int,
                   prob: FederatedProblem | None) -> tuple[TrialTrace, float]:
    """One seeded trial; returns its trace and the instance condition number."""
    rng = np.random.default_rng(trial_seed(cfg.seed, index))
    if prob is None:
        prob = gen_problem(cfg.gen, rng)
    chan = ERROR_FREE if cfg.error_free else cfg.chan
    trace = run_algorithm(prob, cfg.algo, chan, cfg.rounds, rng,
                          step=cfg.step_size, rate=cfg.learning_rate,
                          local_steps=cfg.local_steps)
    return trace, prob.kappa


def _trial_worker(args):
    cfg, index, prob = args
    return _run_one_trial(cfg, index, prob)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1,
                   write_outputs: bool = True,
                   label: str | None = None) -> AggregateResult:
    """Run all trials, aggregate, and (optionally) write the output files.

    The aggregate mean gap at each round is the arithmetic mean of the
    per-trial gaps; traces are merged in trial order, so the result does not
    depend on ``jobs``.
    """
    cfg.validate()
    shared_prob = None
    if cfg.problem_shared:
        shared_prob = gen_problem(cfg.gen, np.random.default_rng(problem_seed(cfg.seed)))

    tasks = [(cfg, i, shared_prob) for i in range(cfg.trials)]
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_trial_worker, tasks))
    else:
        outcomes = [_trial_worker(t) for t in tasks]

    traces = [t for t, _ in outcomes]
    kappas = np.array([k for _, k in outcomes])
    result = _aggregate(cfg, traces, kappas, shared_prob,
                        label=label or cfg.algo)
    if write_outputs:
        _write_outputs(cfg, result)
    return result


def _aggregate(cfg: ExperimentConfig, traces: list[TrialTrace],
               kappas: np.ndarray, shared_prob: FederatedProblem | None,
               label: str) -> AggregateResult:
    gaps = np.stack([t.gaps for t in traces])               # (p, T)
    selected = np.stack([t.selected_counts for t in traces])
    alphas = np.stack([t.alphas for t in traces])
    rounds = np.arange(1, cfg.rounds + 1)

    result = AggregateResult(
        label=label,
        rounds=rounds,
        mean_gap=gaps.mean(axis=0),
        min_gap=gaps.min(axis=0),
        max_gap=gaps.max(axis=0),
        mean_selected=selected.mean(axis=0),
        mean_alpha=_nan_aware_mean(alphas),
        kappas=kappas,
        delta0s=np.array([t.delta0 for t in traces]),
        g_measured=max(t.g_measured for t in traces),
        traces=traces,
    )

    # Bound overlays only make sense against a single problem instance.
    single_instance = shared_prob is not None or cfg.trials == 1
    if cfg.algo == "fedsplit" and single_instance:
        kappa = float(kappas[0])
        delta0 = float(result.delta0s[0])
        if cfg.error_free:
            result.thm1_bound = np.array(
                [theorem1_bound(delta0, kappa, int(r) - 1) for r in rounds])
        elif cfg.chan.selection == "top_b" and shared_prob is not None:
            inp = BoundInputs(delta0=delta0, kappa=kappa,
                              lip_sum=shared_prob.lip_sum,
                              g_bound=result.g_measured, b=cfg.chan.top_b,
                              dim=cfg.gen.dim, noise_var=cfg.chan.noise_var,
                              threshold=cfg.chan.threshold,
                              max_power=cfg.chan.max_power)
            result.thm2_as_stated = np.array(
                [theorem2_bound(inp, int(r), "as_stated") for r in rounds])
            result.thm2_as_proved = np.array(
                [theorem2_bound(inp, int(r), "as_proved") for r in rounds])
    return result


def _nan_aware_mean(arr: np.ndarray) -> np.ndarray:
    if np.isnan(arr).all():
        return np.full(arr.shape[1], np.nan)
    return arr.mean(axis=0)


def _fmt(x: float) -> str:
    if x != x:  # nan marks an inapplicable value
        return ""
    return f"{x:.17e}"


CSV_COLUMNS = ("round", "mean_gap", "min_gap", "max_gap", "mean_selected",
               "mean_alpha", "thm1_bound", "thm2_as_stated", "thm2_as_proved")


def emit_csv(result: AggregateResult, path: str) -> None:
    """Write the aggregate as CSV with a fixed column set and byte-stable text."""
    lines = [",".join(CSV_COLUMNS)]
    n = result.rounds.shape[0]
    for i in range(n):
        cells = [
            str(int(result.rounds[i])),
            _fmt(result.mean_gap[i]),
            _fmt(result.min_gap[i]),
            _fmt(result.max_gap[i]),
            _fmt(result.mean_selected[i]),
            _fmt(result.mean_alpha[i]),
            _fmt(result.thm1_bound[i]) if result.thm1_bound is not None else "",
            _fmt(result.thm2_as_stated[i]) if result.thm2_as_stated is not None else "",
            _fmt(result.thm2_as_proved[i]) if result.thm2_as_proved is not None else "",
        ]
        lines.append(",".join(cells))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


LOG_GAP_FLOOR = -16.0


def emit_plotdata(results: list[tuple[str, AggregateResult]], path: str) -> None:
    """Long-format plot file: ``label round log10(mean_gap)`` per row.

    The log of a zero (or sub-1e-16) gap is clamped at -16.
    """
    if not results:
        raise ValueError("need at least one labeled result")
    lines = ["# label round log10_mean_gap"]
    for label, result in results:
        for i in range(result.rounds.shape[0]):
            gap = float(result.mean_gap[i])
            val = LOG_GAP_FLOOR if gap <= 0 else max(np.log10(gap), LOG_GAP_FLOOR)
            lines.append(f"{label} {int(result.rounds[i])} {val:.17e}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary(cfg: ExperimentConfig, result: AggregateResult, path: str) -> None:
    """Config echo plus the terminal metrics of the run."""
    lines = ["[config]"]
    lines.append(f"algorithm = {cfg.algo}")
    lines.append(f"devices = {cfg.gen.n_devices}")
    lines.append(f"samples_per_device = {cfg.gen.samples_per_device}")
    lines.append(f"dim = {cfg.gen.dim}")
    lines.append(f"data_noise_var = {_fmt(cfg.gen.data_noise_var)}")
    lines.append(f"conditioning = {cfg.gen.conditioning}")
    if cfg.gen.kappa_target is not None:
        lines.append(f"kappa_target = {_fmt(cfg.gen.kappa_target)}")
    lines.append(f"error_free = {cfg.error_free}")
    if not cfg.error_free:
        lines.append(f"noise_var = {_fmt(cfg.chan.noise_var)}")
        lines.append(f"threshold = {_fmt(cfg.chan.threshold)}")
        lines.append(f"max_power = {_fmt(cfg.chan.max_power)}")
        lines.append(f"selection = {cfg.chan.selection}")
        if cfg.chan.top_b is not None:
            lines.append(f"top_b = {cfg.chan.top_b}")
    lines.append(f"rounds = {cfg.rounds}")
    lines.append(f"trials = {cfg.trials}")
    lines.append(f"seed = {cfg.seed}")
    lines.append(f"problem_shared = {cfg.problem_shared}")
    lines.append("")
    lines.append("[metrics]")
    lines.append(f"final_mean_gap = {_fmt(result.final_mean_gap)}")
    lines.append(f"measured_g = {_fmt(result.g_measured)}")
    lines.append(f"delta0_mean = {_fmt(float(result.delta0s.mean()))}")
    lines.append(f"kappa_mean = {_fmt(float(result.kappas.mean()))}")
    lines.append(f"kappa_min = {_fmt(float(result.kappas.min()))}")
    lines.append(f"kappa_max = {_fmt(float(result.kappas.max()))}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


TRIAL_CSV_COLUMNS = ("round", "gap", "selected_count", "alpha", "eff_noise_var")


def emit_trial_csv(trace: TrialTrace, path: str) -> None:
    lines = [",".join(TRIAL_CSV_COLUMNS)]
    for rec in trace.records:
        lines.append(",".join([
            str(rec.round_index),
            _fmt(rec.gap),
            str(rec.selected_count),
            _fmt(rec.alpha),
            _fmt(rec.eff_noise_var),
        ]))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_outputs(cfg: ExperimentConfig, result: AggregateResult) -> None:
    os.makedirs(cfg.output_dir, exist_ok=True)
    emit_csv(result, os.path.join(cfg.output_dir, "result.csv"))
    emit_plotdata([(result.label, result)],
                  os.path.join(cfg.output_dir, "plot.dat"))
    write_summary(cfg, result, os.path.join(cfg.output_dir, "summary.txt"))
    if cfg.dump_trials:
        for i, trace in enumerate(result.traces):
            emit_trial_csv(trace, os.path.join(cfg.output_dir, f"trial_{i}.csv"))


def sweep_kappa(cfg: ExperimentConfig, kappas: list[float],
                jobs: int = 1, write_outputs: bool = True) -> list[AggregateResult]:
    """Run the experiment once per condition number, with identical seeds.

    Each value gets its own subdirectory ``kappa_<value>``; a combined
    ``plot.dat`` with one labeled curve per value lands in the top output
    directory.
    """
    if not kappas:
        raise ConfigError("sweep needs at least one kappa value")
    for k in kappas:
        if k < 1:
            raise ConfigError(f"kappa must be >= 1, got {k}")
    results = []
    for k in kappas:
        sub = replace(
            cfg,
            gen=replace(cfg.gen, conditioning="ill", kappa_target=float(k)),
            output_dir=os.path.join(cfg.output_dir, f"kappa_{k:g}"),
        )
        label = f"{cfg.algo}_kappa{k:g}"
        results.append(run_experiment(sub, jobs=jobs,
                                      write_outputs=write_outputs, label=label))
    if write_outputs:
        os.makedirs(cfg.output_dir, exist_ok=True)
        emit_plotdata([(r.label, r) for r in results],
                      os.path.join(cfg.output_dir, "plot.dat"))
    return results


def replay_trial(cfg: ExperimentConfig, index: int, out_path: str) -> TrialTrace:
    """Re-run a single trial by its index and dump its per-round CSV."""
    if not 0 <= index < cfg.trials:
        raise ConfigError(f"trial index {index} outside 0..{cfg.trials - 1}")
    shared_prob = None
    if cfg.problem_shared:
        shared_prob = gen_problem(cfg.gen, np.random.default_rng(problem_seed(cfg.seed)))
    trace, _ = _run_one_trial(cfg, index, shared_prob)
    emit_trial_csv(trace, out_path)
    return trace


def fedsplit_default_step(prob: FederatedProblem) -> float:
    """Expose the analytical default step for summaries and tooling."""
    return default_step(prob)
