"""Configuration-driven experiment runner.

One JSON config describes one study; ``--study``, ``--out`` and ``--seed``
override the corresponding config fields.  Outputs are written atomically
(temp file plus rename) and are byte-identical across reruns of the same
config.
"""

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .analysis import FITTED_METRICS, FIT_FLOOR, convergence_study
from .equilibrium import default_bracket, find_equilibrium
from .errors import ConfigError, PopeqError
from .model import AffineRates, BdiGroupBirths, check_assumptions
from .simulate import SimConfig, ssa_run
from .stationary import TruncationPolicy, stationary_exact
from .stein import HalfLine, stein_solve

STUDIES = (
    "equilibrium",
    "assumptions",
    "stationary-once",
    "stein-audit",
    "simulate",
    "convergence",
)
FORMATS = ("csv", "json", "plotdata")

CONVERGENCE_COLUMNS = (
    "n",
    "c",
    "v_c",
    "tv_to_centred_poisson",
    "kolmogorov",
    "shift_tv",
    "mean_abs_dev",
    "second_moment_in",
    "tail_mass",
    "first_moment_out",
    "second_diff_diag",
    "boundary_mass",
    "residual_norm",
)
STEIN_AUDIT_COLUMNS = (
    "v",
    "set_size",
    "sup_abs_g",
    "sup_abs_dg",
    "sup_abs_lg",
    "max_residual",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description plus its canonical JSON form."""

    model: object
    study: str
    out_dir: str
    formats: tuple
    n: int = None
    n_grid: tuple = None
    truncation_k: float = 12.0
    seed: int = 0
    t_sample: float = None
    t_burn: float = None
    replicas: int = 1
    initial_state: int = None
    v_grid: tuple = ()
    stein_window_k: float = 12.0
    delta: float = None
    delta_prime: float = None
    bracket: tuple = None
    raw: dict = field(default_factory=dict, compare=False)


def _fail(msg):
    raise ConfigError(msg)


def _get_number(block, key, default=None, required=False, positive=False):
    if key not in block or block[key] is None:
        if required:
            _fail(f"missing required field {key!r}")
        return default
    value = block[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        _fail(f"field {key!r} must be a number, got {value!r}")
    if positive and not value > 0:
        _fail(f"field {key!r} must be positive, got {value!r}")
    return value


def build_model(block):
    if not isinstance(block, dict):
        _fail("'model' must be an object")
    family = block.get("family")
    try:
        if family == "bdi":
            q = block.get("q", [[1, 1.0]])
            if not isinstance(q, list) or not all(
                isinstance(row, list) and len(row) == 2 for row in q
            ):
                _fail("'q' must be a list of [j, q_j] pairs")
            return BdiGroupBirths(
                a=_get_number(block, "a", required=True),
                b=_get_number(block, "b", default=0.0),
                d=_get_number(block, "d", required=True),
                q=[(int(j), float(w)) for j, w in q],
            )
        if family == "affine":
            rates = block.get("rates")
            if not isinstance(rates, list) or not all(
                isinstance(row, list) and len(row) == 3 for row in rates
            ):
                _fail("'rates' must be a list of [j, u, v] rows")
            return AffineRates(coeffs=rates)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        _fail(f"invalid model parameters: {exc}")
    _fail(f"unknown or unsupported model family {family!r}")


def validate_config_dict(doc):
    """Validate a raw config document; returns an ExperimentConfig."""
    if not isinstance(doc, dict):
        _fail("config must be a JSON object")
    model = build_model(doc.get("model", _fail("missing 'model' block") if "model" not in doc else None) or doc["model"])
    study = doc.get("study")
    if study not in STUDIES:
        _fail(f"'study' must be one of {list(STUDIES)}, got {study!r}")

    output = doc.get("output", {})
    if not isinstance(output, dict):
        _fail("'output' must be an object")
    out_dir = output.get("dir", "out")
    formats = tuple(output.get("formats", ["csv", "json"]))
    if not formats or any(f not in FORMATS for f in formats):
        _fail(f"'output.formats' entries must be among {list(FORMATS)}")

    n = doc.get("n")
    if n is not None and (not isinstance(n, int) or n < 1):
        _fail(f"'n' must be a positive integer, got {n!r}")
    n_grid = doc.get("n_grid")
    if n_grid is not None:
        if (
            not isinstance(n_grid, list)
            or not n_grid
            or any(not isinstance(m, int) or m < 1 for m in n_grid)
        ):
            _fail("'n_grid' must be a nonempty list of positive integers")
        n_grid = tuple(n_grid)

    if study == "convergence" and not n_grid:
        _fail("study 'convergence' requires a nonempty 'n_grid'")
    if study in ("stationary-once", "simulate") and n is None:
        _fail(f"study {study!r} requires 'n'")

    trunc = doc.get("truncation", {})
    if not isinstance(trunc, dict):
        _fail("'truncation' must be an object")
    truncation_k = _get_number(trunc, "k", default=12.0, positive=True)

    sim = doc.get("sim", {})
    if not isinstance(sim, dict):
        _fail("'sim' must be an object")
    seed = sim.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        _fail("'sim.seed' must be an integer")
    replicas = sim.get("replicas", 1)
    if not isinstance(replicas, int) or replicas < 1:
        _fail("'sim.replicas' must be a positive integer")
    initial_state = sim.get("initial_state")
    if initial_state is not None and not isinstance(initial_state, int):
        _fail("'sim.initial_state' must be an integer")

    stein_block = doc.get("stein", {})
    if not isinstance(stein_block, dict):
        _fail("'stein' must be an object")
    v_grid = stein_block.get("v_grid", [])
    if not isinstance(v_grid, list) or any(
        not isinstance(v, (int, float)) or v <= 0 for v in v_grid
    ):
        _fail("'stein.v_grid' must be a list of positive numbers")
    if study == "stein-audit" and not v_grid:
        _fail("study 'stein-audit' requires a nonempty 'stein.v_grid'")

    ana = doc.get("analysis", {})
    if not isinstance(ana, dict):
        _fail("'analysis' must be an object")

    bracket = doc.get("bracket")
    if bracket is not None:
        if (
            not isinstance(bracket, list)
            or len(bracket) != 2
            or not all(isinstance(x, (int, float)) for x in bracket)
        ):
            _fail("'bracket' must be a [lo, hi] pair")
        bracket = (float(bracket[0]), float(bracket[1]))

    return ExperimentConfig(
        model=model,
        study=study,
        out_dir=str(out_dir),
        formats=formats,
        n=n,
        n_grid=n_grid,
        truncation_k=float(truncation_k),
        seed=seed,
        t_sample=_get_number(sim, "t_sample", positive=True),
        t_burn=_get_number(sim, "t_burn"),
        replicas=replicas,
        initial_state=initial_state,
        v_grid=tuple(float(v) for v in v_grid),
        stein_window_k=float(
            _get_number(stein_block, "window_k", default=12.0, positive=True)
        ),
        delta=_get_number(ana, "delta", positive=True),
        delta_prime=_get_number(ana, "delta_prime", positive=True),
        bracket=bracket,
        raw=doc,
    )


def canonical_config(cfg: ExperimentConfig):
    """The resolved config as a dict that validates as a config again."""
    doc = {
        "model": cfg.model.to_dict(),
        "study": cfg.study,
        "output": {"dir": cfg.out_dir, "formats": list(cfg.formats)},
        "truncation": {"k": cfg.truncation_k},
        "sim": {
            "seed": cfg.seed,
            "replicas": cfg.replicas,
            "t_sample": cfg.t_sample,
            "t_burn": cfg.t_burn,
            "initial_state": cfg.initial_state,
        },
        "stein": {"v_grid": list(cfg.v_grid), "window_k": cfg.stein_window_k},
        "analysis": {"delta": cfg.delta, "delta_prime": cfg.delta_prime},
    }
    if cfg.n is not None:
        doc["n"] = cfg.n
    if cfg.n_grid is not None:
        doc["n_grid"] = list(cfg.n_grid)
    if cfg.bracket is not None:
        doc["bracket"] = list(cfg.bracket)
    return doc


def load_config(path, study=None, out_dir=None, seed=None):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        _fail(f"cannot read config {path!r}: {exc}")
    except json.JSONDecodeError as exc:
        _fail(f"config {path!r} is not valid JSON: {exc}")
    if study is not None:
        doc["study"] = study
    if out_dir is not None:
        doc.setdefault("output", {})
        doc["output"]["dir"] = out_dir
    if seed is not None:
        doc.setdefault("sim", {})
        doc["sim"]["seed"] = seed
    return validate_config_dict(doc)


def _fmt(x):
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(x) for x in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_json(path, doc):
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _policy(cfg):
    return TruncationPolicy(k=cfg.truncation_k)


def _run_equilibrium(cfg):
    eq = find_equilibrium(cfg.model, cfg.bracket)
    summary = f"equilibrium: c={eq.c:.12g} v_c={eq.v_c:.12g}"
    return summary, {"equilibrium": eq.to_dict()}, {}


def _run_assumptions(cfg):
    window = cfg.bracket if cfg.bracket is not None else default_bracket(cfg.model)
    rep = check_assumptions(cfg.model, window)
    ok = all((rep.a1_ok, rep.a2a_ok, rep.a2b_ok, rep.a3_ok))
    summary = f"assumptions: {'all hold' if ok else 'FAILED'} on window {window}"
    return summary, {"assumptions": rep.to_dict(), "window": list(window)}, {}


def _run_stationary_once(cfg):
    eq = find_equilibrium(cfg.model, cfg.bracket)
    dist, diag = stationary_exact(cfg.model, cfg.n, _policy(cfg), eq=eq)
    csvs = {}
    if "csv" in cfg.formats:
        rows = list(zip(dist.states().tolist(), dist.weights.tolist()))
        csvs[f"stationary_{cfg.n}.csv"] = (("state", "probability"), rows)
    results = {
        "n": cfg.n,
        "diagnostics": {
            "boundary_mass": diag["boundary_mass"],
            "residual_norm": diag["residual_norm"],
            "window": list(diag["window"]),
            "states": diag["states"],
            "method": diag["method"],
        },
        "mean": dist.mean(),
        "var": dist.var(),
        "equilibrium": eq.to_dict(),
    }
    summary = (
        f"stationary n={cfg.n}: window={diag['window']} "
        f"residual={diag['residual_norm']:.3g} boundary={diag['boundary_mass']:.3g}"
    )
    return summary, results, csvs


def _run_stein_audit(cfg):
    rows = []
    worst = 0.0
    for v in cfg.v_grid:
        floor_v = int(math.floor(v))
        hi = floor_v + int(math.ceil(cfg.stein_window_k * math.sqrt(v)))
        window = (-floor_v, hi)
        family = [frozenset({l}) for l in range(-floor_v, hi + 1)]
        family.extend(HalfLine(l) for l in range(-floor_v, hi + 1))
        for B in family:
            sol = stein_solve(v, B, window, cover_k=min(cfg.stein_window_k, 4.0))
            size = (
                hi - max(B.threshold, -floor_v) + 1
                if isinstance(B, HalfLine)
                else len(B)
            )
            rep = sol.bound_report
            worst = max(worst, rep.max_residual)
            rows.append(
                (
                    v,
                    size,
                    rep.sup_abs_g,
                    rep.sup_abs_dg,
                    rep.sup_abs_lg,
                    rep.max_residual,
                )
            )
    csvs = {}
    if "csv" in cfg.formats:
        csvs["stein_audit.csv"] = (STEIN_AUDIT_COLUMNS, rows)
    results = {
        "v_grid": list(cfg.v_grid),
        "sets_audited": len(rows),
        "worst_residual": worst,
    }
    summary = (
        f"stein-audit: {len(rows)} sets over v_grid={list(cfg.v_grid)} "
        f"worst residual={worst:.3g}"
    )
    return summary, results, csvs


def _run_simulate(cfg):
    sim = SimConfig(
        n=cfg.n,
        t_sample=cfg.t_sample,
        t_burn=cfg.t_burn,
        replicas=cfg.replicas,
        seed=cfg.seed,
        initial_state=cfg.initial_state,
    )
    occ = ssa_run(cfg.model, sim)
    csvs = {}
    if "csv" in cfg.formats:
        rows = list(zip(occ.dist.states().tolist(), occ.dist.weights.tolist()))
        csvs[f"occupation_{cfg.n}.csv"] = (("state", "probability"), rows)
    results = {
        "n": cfg.n,
        "total_jumps": occ.total_jumps,
        "max_excursion": occ.max_excursion,
    }
    summary = (
        f"simulate n={cfg.n}: jumps={occ.total_jumps} "
        f"max_excursion={occ.max_excursion:.4g}"
    )
    return summary, results, csvs


def _run_convergence(cfg, jobs):
    report = convergence_study(
        cfg.model,
        cfg.n_grid,
        policy=_policy(cfg),
        delta=cfg.delta,
        delta_prime=cfg.delta_prime,
        jobs=jobs,
        bracket=cfg.bracket,
    )
    csvs = {}
    if "csv" in cfg.formats:
        rows = [
            tuple(getattr(row, col) for col in CONVERGENCE_COLUMNS)
            for row in report.rows
        ]
        csvs["convergence.csv"] = (CONVERGENCE_COLUMNS, rows)
    plots = {}
    if "plotdata" in cfg.formats:
        for name in FITTED_METRICS:
            pts = [
                (math.log(row.n), math.log(getattr(row, name)))
                for row in report.rows
                if getattr(row, name) >= FIT_FLOOR
            ]
            if pts:
                plots[f"{name}.plotdata"] = pts
    fitted_bits = [
        f"{name}={fit.slope:+.3f}"
        for name, fit in report.fitted.items()
        if fit is not None
    ]
    summary = "convergence: slopes " + (" ".join(fitted_bits) or "(none fitted)")
    return summary, report.to_dict(), csvs, plots


def run(cfg: ExperimentConfig, jobs=1):
    """Execute one study; returns (summary line, file names written)."""
    plots = {}
    if cfg.study == "equilibrium":
        summary, results, csvs = _run_equilibrium(cfg)
    elif cfg.study == "assumptions":
        summary, results, csvs = _run_assumptions(cfg)
    elif cfg.study == "stationary-once":
        summary, results, csvs = _run_stationary_once(cfg)
    elif cfg.study == "stein-audit":
        summary, results, csvs = _run_stein_audit(cfg)
    elif cfg.study == "simulate":
        summary, results, csvs = _run_simulate(cfg)
    elif cfg.study == "convergence":
        summary, results, csvs, plots = _run_convergence(cfg, jobs)
    else:  # pragma: no cover - validate_config_dict rejects unknown studies
        raise ConfigError(f"unknown study {cfg.study!r}")

    written = []
    out = cfg.out_dir
    if "json" in cfg.formats:
        report = {
            "study": cfg.study,
            "config": canonical_config(cfg),
            "results": results,
        }
        path = os.path.join(out, "report.json")
        _write_json(path, report)
        written.append(path)
    for name, (header, rows) in csvs.items():
        path = os.path.join(out, name)
        _write_csv(path, header, rows)
        written.append(path)
    for name, pts in plots.items():
        path = os.path.join(out, name)
        body = "\n".join(f"{_fmt(x)} {_fmt(y)}" for x, y in pts)
        _atomic_write(path, f"# ln_n ln_metric\n{body}\n")
        written.append(path)
    return summary, written


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="popeq",
        description="Equilibrium studies of density dependent jump processes.",
    )
    parser.add_argument("--config", required=True, help="path to a JSON config")
    parser.add_argument("--study", choices=STUDIES, help="override config study")
    parser.add_argument("--out", help="override output directory")
    parser.add_argument("--seed", type=int, help="override simulation seed")
    parser.add_argument(
        "--jobs",
        type=int,
        default=os.cpu_count() or 1,
        help="worker threads for per-n rows (default: logical cores)",
    )
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.study, args.out, args.seed)
        summary, written = run(cfg, jobs=max(1, args.jobs))
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}))
        return 2
    except PopeqError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    print(f"{summary} [{len(written)} file(s) -> {cfg.out_dir}]")
    return 0


if __name__ == "__main__":
    sys.exit(main())
