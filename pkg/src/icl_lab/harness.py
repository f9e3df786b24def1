"""Named experiments over the post-training pipeline, persisted as CSV.

Each experiment fixes a protocol: build the two-block covariances, pretrain
in closed form, post-train (closed-form SFT or gradient OS), evaluate the
post-test error, and emit one row per grid point with mean and stderr over
trial repetitions.  Identical config and seed give a byte-identical CSV no
matter how many workers run the grid; wall_time is the one column exempt
from that guarantee.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError
from .evaluator import posttest_error_exact, posttest_error_mc
from .lsa import pretrained_init
from .numerics import RngStream
from .os_sup import OsConfig, os_gd, os_hessian_bound
from .sft import SftConfig, sft_closed_form, sft_first_order, sft_gd
from .taskdata import CovarianceSpec, build_phi, gen_prompt_batch, materialize
from .theory import POLE_GUARD, TheoryInputs, theory_components

EXPERIMENTS = (
    "sft-sweep-B", "sft-sweep-n", "sft-sweep-k",
    "os-sweep-B", "os-sweep-n", "os-sweep-k",
    "theory-curve", "compare-theory-sim", "gd-rate-demo",
)

SWEPT_VAR = {
    "sft-sweep-B": "B", "sft-sweep-n": "n", "sft-sweep-k": "k",
    "os-sweep-B": "B", "os-sweep-n": "n", "os-sweep-k": "k",
    "theory-curve": "B", "compare-theory-sim": "B", "gd-rate-demo": None,
}

_SCALARS = ["experiment", "d", "m", "rho", "r", "eta", "trials", "seed"]
_SWEEP_COLS = _SCALARS + [
    "n", "B", "k", "swept", "swept_value",
    "sim_error_mean", "sim_error_stderr", "divergence_count", "wall_time",
]

SCHEMAS: dict[str, list[str]] = {
    **{e: list(_SWEEP_COLS) for e in
       ("sft-sweep-B", "sft-sweep-n", "sft-sweep-k")},
    **{e: _SWEEP_COLS[:-1] + ["gamma_step", "wall_time"] for e in
       ("os-sweep-B", "os-sweep-n", "os-sweep-k")},
    # theory rows are pure functions of the config: no wall_time, so a rerun
    # is byte-identical including this schema's every cell
    "theory-curve": _SCALARS + [
        "n", "beta", "F", "q", "Bias", "T_inv", "T_inv_Sigma",
        "T_var", "T_var_Sigma",
    ],
    "compare-theory-sim": _SCALARS + [
        "n", "B", "beta", "theory_F",
        "sim_fo_mean", "sim_fo_stderr", "sim_opt_mean", "sim_opt_stderr",
        "divergence_count", "wall_time",
    ],
    "gd-rate-demo": _SCALARS + [
        "n", "B", "step", "loss", "dist_to_opt", "predicted_rate",
    ],
}

MC_EVAL_TRIALS = 2000


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    d: int = 400
    m: int = 200
    n: tuple[int, ...] = (800,)
    B: tuple[int, ...] = (400,)
    k: tuple[int, ...] = (1,)
    rho: float = 0.1
    r: float = 0.01
    eta: float = 0.2
    gamma_step: float | None = None
    gd_steps: int = 100
    trials: int = 10
    seed: int = 0
    workers: int = 1
    out: str = "results.csv"

    def scalar(self, name: str) -> int:
        val = getattr(self, name)
        if len(val) != 1:
            raise ConfigError([f"{name} must be a single value here"])
        return val[0]


def as_grid(value) -> tuple[int, ...]:
    if isinstance(value, (int, np.integer)):
        return (int(value),)
    return tuple(int(v) for v in value)


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Every violation in one pass, so a bad config file reads as one report."""
    errs: list[str] = []
    if cfg.experiment not in EXPERIMENTS:
        errs.append(f"unknown experiment {cfg.experiment!r}; "
                    f"choose from {', '.join(EXPERIMENTS)}")
        return errs
    if cfg.d < 1:
        errs.append("d must be >= 1")
    if not (0 < cfg.m < cfg.d):
        errs.append("m must be < d (and positive)")
    if cfg.rho < 0:
        errs.append("rho must be >= 0")
    if cfg.r < 0:
        errs.append("r must be >= 0")
    if not (0 < cfg.eta < 1):
        errs.append("eta must lie in (0, 1)")
    if cfg.trials < 0:
        errs.append("trials must be >= 0")
    if cfg.workers < 1:
        errs.append("workers must be >= 1")
    for name in ("n", "B", "k"):
        grid = getattr(cfg, name)
        if len(grid) == 0:
            errs.append(f"{name} grid is empty")
        elif any(b <= a for a, b in zip(grid, grid[1:])):
            errs.append(f"{name} grid must be strictly increasing")
        elif grid[0] < 1:
            errs.append(f"{name} values must be >= 1")
    swept = SWEPT_VAR[cfg.experiment]
    for name in ("n", "B", "k"):
        grid = getattr(cfg, name)
        if name != swept and len(grid) > 1:
            errs.append(f"{name} is not the swept variable of "
                        f"{cfg.experiment} but has {len(grid)} values")
    if cfg.experiment in ("theory-curve", "compare-theory-sim"):
        for b in cfg.B:
            beta = b / cfg.d
            if abs(beta - 1.0) <= POLE_GUARD:
                errs.append(f"B = {b} gives beta = {beta}, inside the pole "
                            f"guard band |beta - 1| <= {POLE_GUARD}")
    if cfg.experiment == "theory-curve" and cfg.r == 0:
        errs.append("theory-curve requires r > 0 (delta_2 has a pole at r = 0)")
    return errs


def _covariances(cfg: ExperimentConfig):
    base = dict(d=cfg.d, m=cfg.m, rho=cfg.rho, r=cfg.r, eta=cfg.eta)
    sigma0 = materialize(CovarianceSpec(kind="pretrain", **base))
    A = materialize(CovarianceSpec(kind="posttrain", **base))
    sigma = materialize(CovarianceSpec(kind="posttest", **base))
    return sigma0, A, sigma


def _sft_trial(cfg: ExperimentConfig, n: int, B: int, rng: RngStream) -> float:
    sigma0, A, sigma = _covariances(cfg)
    init = pretrained_init(sigma0, n)
    batch = gen_prompt_batch(A, B, n, rng, store_s=False)
    opt = sft_closed_form(batch, -init.V, cfg.eta)
    return posttest_error_exact(opt.V, sigma, n) / cfg.d


def _os_trial(cfg: ExperimentConfig, n: int, B: int, k: int,
              rng: RngStream) -> tuple[float, int, float]:
    sigma0, A, sigma = _covariances(cfg)
    init = pretrained_init(sigma0, n)
    batch = gen_prompt_batch(A, B, n, rng.child(0), store_s=True)
    bound = os_hessian_bound(init.V, batch, k)
    step = cfg.gamma_step if cfg.gamma_step is not None else 0.5 / bound
    os_cfg = OsConfig(k=k, gamma=step, steps=cfg.gd_steps, telemetry_every=0)
    diverged = 0
    try:
        params, _, _ = os_gd(init, batch, os_cfg)
    except DivergenceError as exc:
        if exc.last_stable is None:
            return math.inf, 1, step
        params, diverged = exc.last_stable, 1
    report = posttest_error_mc(params, sigma, n, k, MC_EVAL_TRIALS,
                               rng.child(1))
    return report.mc_mean / cfg.d, diverged + report.diverged, step


def _compare_trial(cfg: ExperimentConfig, n: int, B: int,
                   rng: RngStream) -> tuple[float, float]:
    sigma0, A, sigma = _covariances(cfg)
    init = pretrained_init(sigma0, n)
    g0inv = -init.V
    batch = gen_prompt_batch(A, B, n, rng, store_s=False)
    fo = sft_first_order(batch, A, g0inv, cfg.eta)
    opt = sft_closed_form(batch, g0inv, cfg.eta)
    return (posttest_error_exact(fo, sigma, n) / cfg.d,
            posttest_error_exact(opt.V, sigma, n) / cfg.d)


def _run_task(args):
    """Worker entry: one (grid point, trial) cell, its own RNG stream."""
    cfg, point_idx, trial, n, B, k = args
    rng = RngStream(cfg.seed, (point_idx, trial))
    if cfg.experiment.startswith("sft-sweep"):
        return _sft_trial(cfg, n, B, rng)
    if cfg.experiment.startswith("os-sweep"):
        return _os_trial(cfg, n, B, k, rng)
    if cfg.experiment == "compare-theory-sim":
        return _compare_trial(cfg, n, B, rng)
    raise ConfigError([f"no task runner for {cfg.experiment}"])


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return math.inf, math.inf
    arr = np.asarray(finite)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return mean, stderr


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".12g")


def _scalar_cells(cfg: ExperimentConfig) -> dict:
    return {"experiment": cfg.experiment, "d": cfg.d, "m": cfg.m,
            "rho": cfg.rho, "r": cfg.r, "eta": cfg.eta,
            "trials": cfg.trials, "seed": cfg.seed}


def _theory_rows(cfg: ExperimentConfig) -> list[dict]:
    n = cfg.scalar("n")
    gamma = cfg.d / n
    mu1 = cfg.m / cfg.d
    rows = []
    for b in cfg.B:
        comp = theory_components(TheoryInputs(
            rho=cfg.rho, r=cfg.r, eta=cfg.eta, gamma=gamma,
            mu1=mu1, beta=b / cfg.d))
        rows.append({**_scalar_cells(cfg), "n": n, "beta": b / cfg.d,
                     "F": comp.F, "q": comp.q, "Bias": comp.Bias,
                     "T_inv": comp.T_inv, "T_inv_Sigma": comp.T_inv_Sigma,
                     "T_var": comp.T_var, "T_var_Sigma": comp.T_var_Sigma})
    return rows


def _gd_rate_rows(cfg: ExperimentConfig) -> list[dict]:
    n, B = cfg.scalar("n"), cfg.scalar("B")
    sigma0, A, _ = _covariances(cfg)
    init = pretrained_init(sigma0, n)
    batch = gen_prompt_batch(A, B, n, RngStream(cfg.seed, (0, 0)),
                             store_s=False)
    sft_cfg = SftConfig(eta=cfg.eta, k=cfg.scalar("k"), gamma=cfg.gamma_step,
                        steps=cfg.gd_steps)
    _, M = build_phi(batch)
    evals = np.linalg.eigvalsh(M)
    lam_max = float(evals[-1])
    lam_min_pos = float(evals[evals > 1e-10 * lam_max][0])
    predicted = 1.0 - lam_min_pos / lam_max
    _, traj = sft_gd(init, batch, sft_cfg)
    rows: list[dict] = []
    for step, (loss, dist) in enumerate(traj):
        rows.append({**_scalar_cells(cfg), "n": n, "B": B, "step": step,
                     "loss": loss, "dist_to_opt": dist,
                     "predicted_rate": predicted})
    return rows


def run_experiment(cfg: ExperimentConfig,
                   workers: int | None = None) -> list[dict]:
    """Rows (dicts keyed by the experiment schema) in deterministic order."""
    errs = validate_config(cfg)
    if errs:
        raise ConfigError(errs)
    if cfg.experiment == "theory-curve":
        return _theory_rows(cfg)
    if cfg.experiment == "gd-rate-demo":
        return _gd_rate_rows(cfg)

    swept = SWEPT_VAR[cfg.experiment]
    grid = getattr(cfg, swept)
    workers = workers if workers is not None else cfg.workers
    tasks = []
    for pi, val in enumerate(grid):
        n = val if swept == "n" else cfg.scalar("n")
        B = val if swept == "B" else cfg.scalar("B")
        k = val if swept == "k" else cfg.scalar("k")
        for t in range(cfg.trials):
            tasks.append((cfg, pi, t, n, B, k))
    t0 = time.monotonic()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        results = [_run_task(t) for t in tasks]
    wall = time.monotonic() - t0

    rows = []
    per_point = cfg.trials
    for pi, val in enumerate(grid):
        chunk = results[pi * per_point:(pi + 1) * per_point]
        n = val if swept == "n" else cfg.scalar("n")
        B = val if swept == "B" else cfg.scalar("B")
        k = val if swept == "k" else cfg.scalar("k")
        base = {**_scalar_cells(cfg), "n": n, "B": B, "k": k,
                "swept": swept, "swept_value": val, "wall_time": wall}
        if cfg.experiment.startswith("sft-sweep"):
            mean, se = _mean_stderr(list(chunk))
            rows.append({**base, "sim_error_mean": mean,
                         "sim_error_stderr": se, "divergence_count": 0})
        elif cfg.experiment.startswith("os-sweep"):
            mean, se = _mean_stderr([c[0] for c in chunk])
            div = sum(c[1] for c in chunk)
            step = chunk[0][2] if chunk else math.nan
            rows.append({**base, "sim_error_mean": mean,
                         "sim_error_stderr": se, "divergence_count": div,
                         "gamma_step": step})
        else:  # compare-theory-sim
            fo_mean, fo_se = _mean_stderr([c[0] for c in chunk])
            opt_mean, opt_se = _mean_stderr([c[1] for c in chunk])
            comp = theory_components(TheoryInputs(
                rho=cfg.rho, r=cfg.r, eta=cfg.eta, gamma=cfg.d / n,
                mu1=cfg.m / cfg.d, beta=B / cfg.d))
            rows.append({**_scalar_cells(cfg), "n": n, "B": B,
                         "beta": B / cfg.d, "theory_F": comp.F,
                         "sim_fo_mean": fo_mean, "sim_fo_stderr": fo_se,
                         "sim_opt_mean": opt_mean, "sim_opt_stderr": opt_se,
                         "divergence_count": 0, "wall_time": wall})
    return rows


def write_csv(rows: list[dict], experiment: str, path: str) -> None:
    cols = SCHEMAS[experiment]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in cols])


def parse_grid(text: str) -> tuple[int, ...]:
    """`lo:hi:step` (inclusive endpoints where step lands) or `a,b,c`."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError([f"grid {text!r} must be lo:hi:step"])
        try:
            lo, hi, step = (int(p) for p in parts)
        except ValueError:
            raise ConfigError([f"grid {text!r} has non-integer parts"])
        if step < 1:
            raise ConfigError([f"grid {text!r} needs step >= 1"])
        return tuple(range(lo, hi + 1, step))
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ConfigError([f"grid {text!r} has non-integer parts"])


def parse_config_file(path: str) -> dict:
    """Flat `key = value` lines; # comments; quoted or bare strings."""
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(
                    [f"{path}:{lineno}: expected key = value, got {raw.rstrip()!r}"])
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if len(val) >= 2 and val[0] == val[-1] and val[0] in "\"'":
                val = val[1:-1]
            out[key] = val
    return out


def build_config(experiment: str, file_values: dict,
                 overrides: dict) -> ExperimentConfig:
    """File values first, CLI flags win."""
    merged = {**file_values, **{k: v for k, v in overrides.items()
                                if v is not None}}
    merged.pop("experiment", None)
    kwargs: dict = {"experiment": experiment}
    grids = {"n", "B", "k"}
    ints = {"d", "m", "gd_steps", "trials", "seed", "workers"}
    floats = {"rho", "r", "eta", "gamma_step"}
    errs = []
    for key, val in merged.items():
        try:
            if key in grids:
                kwargs[key] = parse_grid(str(val))
            elif key in ints:
                kwargs[key] = int(val)
            elif key in floats:
                kwargs[key] = float(val)
            elif key == "out":
                kwargs[key] = str(val)
            else:
                errs.append(f"unknown config key {key!r}")
        except (ValueError, ConfigError) as exc:
            errs.append(f"bad value for {key!r}: {exc}")
    if errs:
        raise ConfigError(errs)
    return ExperimentConfig(**kwargs)
