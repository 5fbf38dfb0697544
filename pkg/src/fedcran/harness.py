"""Experiment orchestration: config loading, seeded sweeps, CSV/JSON emission.

A config file is a key/value tree with sections scenario / chip / convergence /
optimizer / experiment / fl; absent keys fall back to the §V-style defaults
baked into the dataclasses, unknown keys are rejected by name. Sweeps run each
(value, realization) cell on a freshly sampled channel shared by every
requested scheme, then aggregate means and standard errors per (value, scheme).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import flsim
from .channel import Scenario, sample_channels
from .convergence import ConvergenceConstants
from .energy import ChipModel
from .errors import FedCranError, InvalidConfigError
from .flsim import FLRunConfig
from .optimizer import BASELINE_SCHEMES, OptimizerConfig, evaluate_baseline

__all__ = [
    "ModelCase",
    "MODEL_CASES",
    "ExperimentSpec",
    "FLExperimentSpec",
    "dbm_to_watts",
    "load_config",
    "apply_sweep",
    "run_experiment",
    "run_fl_experiment",
    "SWEEP_COLUMNS",
    "FL_SUMMARY_COLUMNS",
    "FL_TRACE_COLUMNS",
    "write_rows",
    "rows_to_text",
]

SWEEP_AXES = ("none", "G_bar", "P_bar", "eps_target", "model_case", "c_prec")

SWEEP_COLUMNS = [
    "sweep_value", "scheme", "mean_total_J", "se_total_J", "mean_T_rounds",
    "c_prec_mode", "compute_J", "device_tx_J", "fronthaul_J",
]
FL_SUMMARY_COLUMNS = ["c_prec", "metric", "value"]
FL_TRACE_COLUMNS = ["round", "loss_gap", "bound_value", "c_prec", "seed"]


@dataclass(frozen=True)
class ModelCase:
    """Workload counts of one QNN preset: weights, MACs per step, layer outputs."""

    name: str
    n_weights: float
    n_mac: float
    o_s: float

    def __post_init__(self):
        if self.n_weights <= 0 or self.n_mac <= 0 or self.o_s <= 0:
            raise InvalidConfigError(f"model case {self.name}: counts must be > 0")


# batch-1 counts from the default two-conv network, then the batch-16 presets
MODEL_CASES = {
    "case1": ModelCase("case1", 0.28e6, 0.37e6, 2266.0),
    "case1_bs16": ModelCase("case1_bs16", 0.28e6, 11.85e6, 2266.0),
    "case2_bs16": ModelCase("case2_bs16", 1.05e6, 39.70e6, 2394.0),
    "case3_bs16": ModelCase("case3_bs16", 2.08e6, 70.56e6, 3394.0),
    "case4_bs16": ModelCase("case4_bs16", 6.08e6, 198.56e6, 5368.0),
    "case5_bs16": ModelCase("case5_bs16", 7.08e6, 230.56e6, 6368.0),
}


def dbm_to_watts(dbm) -> float:
    return float(10.0 ** ((np.asarray(dbm, float) - 30.0) / 10.0))


@dataclass
class ExperimentSpec:
    sweep: str = "none"
    values: list = field(default_factory=lambda: [None])
    realizations: int = 20      # desk scale; raise to 1000 for paper scale
    seed: int = 0
    schemes: list = field(default_factory=lambda: list(BASELINE_SCHEMES))
    workers: int = 1
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.sweep not in SWEEP_AXES:
            raise InvalidConfigError(
                f"sweep axis {self.sweep!r} not one of {SWEEP_AXES}"
            )
        if not self.values:
            raise InvalidConfigError("sweep needs at least one value")
        if self.sweep == "none" and self.values != [None]:
            raise InvalidConfigError("sweep 'none' takes no values")
        if self.sweep in ("G_bar", "P_bar", "eps_target", "c_prec"):
            vals = [float(v) for v in self.values]
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise InvalidConfigError("sweep values must be strictly increasing")
            self.values = [int(v) for v in vals] if self.sweep == "c_prec" else vals
        if self.sweep == "model_case":
            unknown = [v for v in self.values if v not in MODEL_CASES]
            if unknown:
                raise InvalidConfigError(f"unknown model case(s) {unknown}")
            if len(set(self.values)) != len(self.values):
                raise InvalidConfigError("model case values must be unique")
        if self.realizations < 1:
            raise InvalidConfigError("realizations must be >= 1")
        if self.workers < 1:
            raise InvalidConfigError("workers must be >= 1")
        bad = [s for s in self.schemes if s not in BASELINE_SCHEMES]
        if bad or not self.schemes:
            raise InvalidConfigError(
                f"schemes must be a nonempty subset of {sorted(BASELINE_SCHEMES)}, "
                f"got {self.schemes}"
            )
        if self.format not in ("csv", "json"):
            raise InvalidConfigError(f"format must be csv or json, got {self.format!r}")


@dataclass
class FLExperimentSpec:
    kind: str = "quadratic"
    devices: int = 16
    dim: int = 16
    samples_per_device: int = 64
    mu_reg: float = 0.5
    task_seed: int = 0
    rounds: int = 100
    local_steps: int = 5
    k_bar: int = 10
    batch: int = 16
    c_prec_values: list = field(default_factory=lambda: [2, 4, 8, 16])
    n_seeds: int = 10
    seed: int = 0
    out: str | None = None
    traces_out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if not self.c_prec_values:
            raise InvalidConfigError("c_prec_values must be nonempty")
        vals = [int(v) for v in self.c_prec_values]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise InvalidConfigError("c_prec_values must be strictly increasing")
        self.c_prec_values = vals
        if self.n_seeds < 1:
            raise InvalidConfigError("n_seeds must be >= 1")
        if self.format not in ("csv", "json"):
            raise InvalidConfigError(f"format must be csv or json, got {self.format!r}")


# ------------------------------------------------------------ config loading


_SCENARIO_KEYS = {
    "K", "M", "N", "B_hz", "radius_m", "T0_db", "alpha_pl", "noise_var_w",
    "P_bar_dbm", "P_bar_w", "G_bar_bps", "P_fl_w_per_bps", "model_case",
    "batch_multiplier",
}
_CHIP_KEYS = {"A_pj", "alpha_chip", "c_max", "u", "n_mac", "n_w", "o_s", "I"}
_CONV_KEYS = {
    "L", "mu", "sigma_k", "G", "W_bound", "eps_skew", "beta", "gamma",
    "eps_target", "K_bar",
}
_EXPERIMENT_KEYS = {
    "sweep", "values", "values_dbm", "realizations", "seed", "schemes",
    "workers", "out", "format",
}
_FL_KEYS = {f.name for f in dataclasses.fields(FLExperimentSpec)}
_OPT_KEYS = {f.name for f in dataclasses.fields(OptimizerConfig)}
_SECTIONS = {"scenario", "chip", "convergence", "optimizer", "experiment", "fl"}


def _reject_unknown(mapping, allowed, section):
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise InvalidConfigError(
            f"unknown key(s) in {section}: {', '.join(map(str, unknown))}"
        )


def _num(val, key):
    try:
        return float(val)
    except (TypeError, ValueError):
        raise InvalidConfigError(f"{key} must be a number, got {val!r}") from None


def _as_int(val, key):
    f = _num(val, key)
    if f != int(f):
        raise InvalidConfigError(f"{key} must be an integer, got {val!r}")
    return int(f)


def load_config(path=None):
    """Parse a config file into (Scenario, ExperimentSpec, FLExperimentSpec,
    OptimizerConfig); a missing or empty file yields the defaults."""
    tree = {}
    if path is not None:
        text = Path(path).read_text()
        tree = yaml.safe_load(text) or {}
    if not isinstance(tree, dict):
        raise InvalidConfigError("config root must be a key/value mapping")
    _reject_unknown(tree, _SECTIONS, "config root")
    scn_tree = tree.get("scenario") or {}
    chip_tree = tree.get("chip") or {}
    conv_tree = tree.get("convergence") or {}
    opt_tree = tree.get("optimizer") or {}
    exp_tree = dict(tree.get("experiment") or {})
    fl_tree = tree.get("fl") or {}
    _reject_unknown(scn_tree, _SCENARIO_KEYS, "scenario")
    _reject_unknown(chip_tree, _CHIP_KEYS, "chip")
    _reject_unknown(conv_tree, _CONV_KEYS, "convergence")
    _reject_unknown(opt_tree, _OPT_KEYS, "optimizer")
    _reject_unknown(exp_tree, _EXPERIMENT_KEYS, "experiment")
    _reject_unknown(fl_tree, _FL_KEYS, "fl")

    chip_kw = {}
    if "A_pj" in chip_tree:
        chip_kw["A"] = _num(chip_tree["A_pj"], "chip.A_pj") * 1e-12
    for key in ("alpha_chip", "n_mac", "n_w", "o_s"):
        if key in chip_tree:
            chip_kw[key] = _num(chip_tree[key], f"chip.{key}")
    for key in ("c_max", "u", "I"):
        if key in chip_tree:
            chip_kw[key] = _as_int(chip_tree[key], f"chip.{key}")
    if "model_case" in scn_tree:
        name = scn_tree["model_case"]
        if name not in MODEL_CASES:
            raise InvalidConfigError(
                f"scenario.model_case {name!r} not one of {sorted(MODEL_CASES)}"
            )
        case = MODEL_CASES[name]
        chip_kw.update(n_mac=case.n_mac, n_w=case.n_weights, o_s=case.o_s)
    if "batch_multiplier" in scn_tree:
        mult = _num(scn_tree["batch_multiplier"], "scenario.batch_multiplier")
        if mult <= 0:
            raise InvalidConfigError("scenario.batch_multiplier must be > 0")
        chip_kw["n_mac"] = chip_kw.get("n_mac", ChipModel.n_mac) * mult
    chip = ChipModel(**chip_kw)

    K = _as_int(scn_tree.get("K", 16), "scenario.K")
    conv_kw = {}
    for key in ("L", "mu", "G", "W_bound", "eps_skew", "gamma", "eps_target"):
        if key in conv_tree:
            conv_kw[key] = _num(conv_tree[key], f"convergence.{key}")
    if conv_tree.get("beta") is not None:
        conv_kw["beta"] = _num(conv_tree["beta"], "convergence.beta")
    if "K_bar" in conv_tree:
        conv_kw["K_bar"] = _as_int(conv_tree["K_bar"], "convergence.K_bar")
    sig = conv_tree.get("sigma_k", 1.0)
    sig = np.asarray(sig, float)
    conv_kw["sigma_k"] = np.broadcast_to(sig, (K,)).copy()
    # the model dimension is the weight count by definition, never a free key
    conv = ConvergenceConstants(K=K, I=chip.I, d=int(chip.n_w), **conv_kw)

    scn_kw = {"K": K, "chip": chip, "conv": conv}
    for src, dst in (("M", "M"), ("N", "N")):
        if src in scn_tree:
            scn_kw[dst] = _as_int(scn_tree[src], f"scenario.{src}")
    for src, dst in (
        ("B_hz", "B"), ("radius_m", "radius"), ("T0_db", "T0_db"),
        ("alpha_pl", "alpha_pl"), ("noise_var_w", "noise_var"),
        ("G_bar_bps", "G_bar"), ("P_fl_w_per_bps", "P_fl"),
    ):
        if src in scn_tree:
            scn_kw[dst] = _num(scn_tree[src], f"scenario.{src}")
    if "P_bar_dbm" in scn_tree and "P_bar_w" in scn_tree:
        raise InvalidConfigError("give scenario.P_bar_dbm or P_bar_w, not both")
    if "P_bar_dbm" in scn_tree:
        scn_kw["P_bar"] = dbm_to_watts(_num(scn_tree["P_bar_dbm"], "scenario.P_bar_dbm"))
    elif "P_bar_w" in scn_tree:
        scn_kw["P_bar"] = _num(scn_tree["P_bar_w"], "scenario.P_bar_w")
    scn = Scenario(**scn_kw)

    if exp_tree.get("values_dbm"):
        if exp_tree.get("sweep") != "P_bar":
            raise InvalidConfigError("experiment.values_dbm only applies to P_bar sweeps")
        exp_tree["values"] = [dbm_to_watts(v) for v in exp_tree["values"]]
    exp_tree.pop("values_dbm", None)
    spec = ExperimentSpec(**exp_tree)
    fl_spec = FLExperimentSpec(**fl_tree)
    opt_cfg = OptimizerConfig(**opt_tree)
    return scn, spec, fl_spec, opt_cfg


# ------------------------------------------------------------------- sweeps


def apply_sweep(scn: Scenario, axis: str, value) -> Scenario:
    """Scenario with one sweep axis pinned to ``value`` (c_prec handled later)."""
    if axis in ("none", "c_prec"):
        return scn
    if axis == "G_bar":
        return replace(scn, G_bar=float(value))
    if axis == "P_bar":
        return replace(scn, P_bar=float(value))
    if axis == "eps_target":
        return replace(scn, conv=replace(scn.conv, eps_target=float(value)))
    if axis == "model_case":
        case = MODEL_CASES[value]
        chip = replace(scn.chip, n_mac=case.n_mac, n_w=case.n_weights, o_s=case.o_s)
        conv = replace(scn.conv, d=int(case.n_weights))
        return replace(scn, chip=chip, conv=conv)
    raise InvalidConfigError(f"unknown sweep axis {axis!r}")


def _run_cell(args):
    """One (sweep value, realization) cell: sample a channel, run every scheme."""
    scn, schemes, cfg, fixed_c_prec, seed_key = args
    rng = np.random.default_rng(seed_key)
    ch = sample_channels(scn, rng)
    out = {}
    for scheme in schemes:
        trace = evaluate_baseline(scn, ch, scheme, cfg=cfg, fixed_c_prec=fixed_c_prec)
        rep = trace.report
        out[scheme] = (
            rep.total,
            rep.rounds_T,
            rep.c_prec,
            rep.rounds_T * rep.e_compute_per_round,
            rep.rounds_T * rep.e_device_tx_per_round,
            rep.rounds_T * rep.e_fronthaul_per_round,
        )
    return out


def run_experiment(scn: Scenario, spec: ExperimentSpec, cfg: OptimizerConfig | None = None):
    """Sweep -> (rows, failures); rows follow SWEEP_COLUMNS.

    Each realization samples one channel reused by every scheme. Failed
    realizations are recorded and skipped; more than 10% failures aborts.
    """
    cells = []
    for vi, value in enumerate(spec.values):
        scn_v = apply_sweep(scn, spec.sweep, value)
        fixed = int(value) if spec.sweep == "c_prec" else None
        for r in range(spec.realizations):
            cells.append((vi, r, (scn_v, spec.schemes, cfg, fixed, [spec.seed, vi, r])))

    results, failures = {}, []
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            settled = list(pool.map(_run_cell_safe, [c[2] for c in cells]))
    else:
        settled = [_run_cell_safe(c[2]) for c in cells]
    for (vi, r, _), outcome in zip(cells, settled):
        if isinstance(outcome, str):
            failures.append({"value": spec.values[vi], "realization": r, "error": outcome})
        else:
            results[(vi, r)] = outcome
    if len(failures) > 0.10 * len(cells):
        raise FedCranError(
            f"{len(failures)}/{len(cells)} realizations failed; first: "
            f"{failures[0]['error']}"
        )

    rows = []
    for vi, value in enumerate(spec.values):
        cell_keys = sorted(k for k in results if k[0] == vi)
        for scheme in spec.schemes:
            got = [results[k][scheme] for k in cell_keys]
            if not got:
                continue
            totals = np.array([g[0] for g in got])
            rounds = np.array([g[1] for g in got])
            precs = [g[2] for g in got]
            rows.append({
                "sweep_value": "default" if value is None else value,
                "scheme": scheme,
                "mean_total_J": float(totals.mean()),
                "se_total_J": float(totals.std(ddof=1) / np.sqrt(totals.size))
                if totals.size > 1 else 0.0,
                "mean_T_rounds": float(rounds.mean()),
                "c_prec_mode": int(Counter(precs).most_common(1)[0][0]),
                "compute_J": float(np.mean([g[3] for g in got])),
                "device_tx_J": float(np.mean([g[4] for g in got])),
                "fronthaul_J": float(np.mean([g[5] for g in got])),
            })
    return rows, failures


def _run_cell_safe(args):
    try:
        return _run_cell(args)
    except FedCranError as exc:
        return f"{type(exc).__name__}: {exc}"


# ------------------------------------------------------------ FL experiments


def run_fl_experiment(fl_spec: FLExperimentSpec):
    """Precision sweep on one synthetic task -> (summary_rows, trace_rows)."""
    task = flsim.make_task(
        fl_spec.kind, fl_spec.devices, fl_spec.dim, fl_spec.samples_per_device,
        fl_spec.mu_reg, np.random.default_rng(fl_spec.task_seed),
    )
    initial_gap = task.loss_gap(np.zeros(task.d))
    summary, traces = [], []
    for c in fl_spec.c_prec_values:
        cfg = FLRunConfig(
            rounds=fl_spec.rounds, local_steps=fl_spec.local_steps,
            k_bar=fl_spec.k_bar, c_prec=int(c), batch=fl_spec.batch,
            seed=fl_spec.seed,
        )
        rep = flsim.bound_check(task, cfg, fl_spec.n_seeds, keep_traces=True)
        metrics = {
            "initial_gap": initial_gap,
            "mean_final_gap": rep.mean_final_gap,
            "exceed_fraction": rep.exceed_fraction,
            "n_pairs": rep.n_pairs,
            "w_bound": rep.w_bound,
            "diverged_runs": rep.diverged_runs,
        }
        summary.extend(
            {"c_prec": int(c), "metric": name, "value": val}
            for name, val in metrics.items()
        )
        for i, tr in enumerate(rep.traces):
            traces.extend(
                flsim.trace_records(
                    task, replace(cfg, seed=cfg.seed + i), tr, constants=rep.constants
                )
            )
    return summary, traces


# ----------------------------------------------------------------- emission


def rows_to_text(rows, columns, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "json":
        return json.dumps({"columns": list(columns), "rows": rows}, indent=2) + "\n"
    raise InvalidConfigError(f"format must be csv or json, got {fmt!r}")


def write_rows(rows, columns, path, fmt: str) -> None:
    Path(path).write_text(rows_to_text(rows, columns, fmt))
