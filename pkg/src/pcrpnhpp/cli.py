"""Command-line interface: fit, select-r, simulate, and study subcommands.

Every flag can also be supplied through ``--config FILE`` holding flat
``key = value`` pairs (keys are the long flag names with dashes replaced by
underscores); explicit flags override the file.  The default output
directory comes from $PCRPNHPP_OUTDIR when set.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io as pio
from .errors import ConfigurationError, DataFormatError
from .model import GridPartition, Hyperparams, Region, prepare_fit_data
from .postproc import summarize
from .sampler import SamplerConfig, make_rng, run_chain
from .selection import bitc, chain_mse, dic, lpml, select_r
from .simulate import get_setting, make_setting, run_replicates


def _parse_region(text: str) -> Region:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ConfigurationError(
            f"region must be 'x_min,x_max,y_min,y_max', got {text!r}"
        )
    return Region(*parts)


def _parse_r_grid(text: str) -> np.ndarray:
    """Accept '1.0:2.0:0.1' (inclusive) or a comma-separated list."""
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise ConfigurationError(f"bad r grid {text!r}")
        if step <= 0 or stop < start:
            raise ConfigurationError(f"bad r grid {text!r}")
        count = int(round((stop - start) / step)) + 1
        return np.round(start + step * np.arange(count), 10)
    return np.array([float(v) for v in text.split(",")])


def _parse_config_file(path) -> dict:
    values = {}
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(value: str, like) -> object:
    if isinstance(like, bool):
        low = value.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigurationError(f"expected boolean, got {value!r}")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    merged = dict(defaults)
    given = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "config", "command")
    }
    if getattr(args, "config", None):
        file_values = _parse_config_file(args.config)
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise ConfigurationError(
                f"unknown config key(s) {sorted(unknown)}; valid: {sorted(defaults)}"
            )
        for key, raw in file_values.items():
            merged[key] = _coerce(raw, defaults[key]) if defaults[key] is not None else raw
    merged.update(given)
    return merged


def _default_outdir() -> str:
    return os.environ.get("PCRPNHPP_OUTDIR", "pcrpnhpp_out")


_FIT_DEFAULTS = {
    "points": None,
    "covariates": None,
    "outdir": None,
    "nx": 10,
    "ny": 10,
    "region": None,
    "standardize": False,
    "unit_area": False,
    "r": 1.0,
    "a": 1.0,
    "b": 1.0,
    "alpha": 1.0,
    "v_spike": 0.01,
    "v_slab": 100.0,
    "pi_gamma": 0.5,
    "proposal_sd": 0.05,
    "iters": 5000,
    "burn_in": 1000,
    "thin": 1,
    "seed": 0,
    "k_init": 5,
    "fixed_k1": False,
    "adapt": False,
    "random_scan": False,
    "dahl_thin": 1,
}


def _add_fit_options(sp, with_r: bool = True):
    sp.add_argument("--config", help="flat key = value config file")
    sp.add_argument("--points", help="CSV of point locations (header x,y)")
    sp.add_argument("--covariates", help="CSV of box covariates (box_ix,box_iy,...)")
    sp.add_argument("--outdir", help="output directory")
    sp.add_argument("--nx", type=int, help="boxes along x")
    sp.add_argument("--ny", type=int, help="boxes along y")
    sp.add_argument("--region", help="x_min,x_max,y_min,y_max")
    sp.add_argument("--standardize", action="store_true", default=argparse.SUPPRESS,
                    help="standardize covariate columns")
    sp.add_argument("--unit-area", dest="unit_area", action="store_true",
                    default=argparse.SUPPRESS, help="rescale boxes to unit area")
    if with_r:
        sp.add_argument("--r", type=float, help="partition prior power (>= 1)")
    sp.add_argument("--a", type=float, help="baseline gamma shape")
    sp.add_argument("--b", type=float, help="baseline gamma rate")
    sp.add_argument("--alpha", type=float, help="partition concentration")
    sp.add_argument("--v-spike", dest="v_spike", type=float)
    sp.add_argument("--v-slab", dest="v_slab", type=float)
    sp.add_argument("--pi-gamma", dest="pi_gamma", type=float)
    sp.add_argument("--proposal-sd", dest="proposal_sd", type=float)
    sp.add_argument("--iters", type=int, help="total MCMC iterations")
    sp.add_argument("--burn-in", dest="burn_in", type=int)
    sp.add_argument("--thin", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--k-init", dest="k_init", type=int, help="initial component count")
    sp.add_argument("--fixed-k1", dest="fixed_k1", action="store_true",
                    default=argparse.SUPPRESS, help="constant-baseline mode (K = 1)")
    sp.add_argument("--adapt", action="store_true", default=argparse.SUPPRESS,
                    help="tune proposal SDs during burn-in")
    sp.add_argument("--random-scan", dest="random_scan", action="store_true",
                    default=argparse.SUPPRESS, help="visit boxes in random order")
    sp.add_argument("--dahl-thin", dest="dahl_thin", type=int,
                    help="thin the partition-summary pass")


def _build_model_inputs(cfg: dict):
    if not cfg["points"]:
        raise ConfigurationError("a --points file is required")
    if not cfg["region"]:
        raise ConfigurationError("--region is required (x_min,x_max,y_min,y_max)")
    region = _parse_region(cfg["region"])
    grid = GridPartition.make(region, cfg["nx"], cfg["ny"], unit_area=cfg["unit_area"])
    pattern = pio.load_points(cfg["points"], region=region)
    covariates = None
    if cfg["covariates"]:
        covariates = pio.load_covariates(
            cfg["covariates"], grid, standardize=cfg["standardize"]
        )
    hyper = Hyperparams(
        a=cfg["a"],
        b=cfg["b"],
        alpha=cfg["alpha"],
        r=cfg.get("r", 1.0),
        v_spike=cfg["v_spike"],
        v_slab=cfg["v_slab"],
        pi_gamma=cfg["pi_gamma"],
        proposal_sd=cfg["proposal_sd"],
    )
    config = SamplerConfig(
        n_iter=cfg["iters"],
        burn_in=cfg["burn_in"],
        thin=cfg["thin"],
        fixed_K1=cfg["fixed_k1"],
        adapt_proposal=cfg["adapt"],
        seed=cfg["seed"],
        k_init=cfg["k_init"],
        random_scan=cfg["random_scan"],
    )
    return grid, pattern, covariates, hyper, config


def _criteria_dict(chain, summary) -> dict:
    from .postproc import DahlEstimate

    dahl = DahlEstimate(
        t_star=summary.t_star,
        z_hat=summary.z_hat,
        lambda0_hat=summary.lambda0_hat,
        K_hat=len(summary.lambda0_hat),
    )
    return {
        "r": chain.hyper.r,
        "K_hat": dahl.K_hat,
        "BITC": bitc(chain, dahl),
        "LPML": lpml(chain),
        "DIC": dic(chain, dahl),
        "MSE": chain_mse(chain, dahl),
        "mean_RI": summary.mean_RI,
    }


def _run_meta(cfg: dict, chain, elapsed: float) -> dict:
    return {
        "config": {k: v for k, v in cfg.items()},
        "seed": cfg["seed"],
        "n_points": chain.n_points,
        "elapsed_s": round(elapsed, 3),
    }


def cmd_fit(args) -> int:
    cfg = _merge_config(args, _FIT_DEFAULTS)
    cfg["outdir"] = cfg["outdir"] or _default_outdir()
    grid, pattern, covariates, hyper, config = _build_model_inputs(cfg)
    t0 = time.time()
    chain = run_chain(pattern, grid, covariates, hyper, config)
    summary = summarize(chain, dahl_thin=cfg["dahl_thin"])
    written = pio.export_results(
        summary,
        chain,
        grid,
        cfg["outdir"],
        criteria=_criteria_dict(chain, summary),
        run_meta=_run_meta(cfg, chain, time.time() - t0),
    )
    print(f"fit: N={pattern.n_points} boxes={grid.n} K_hat={len(summary.lambda0_hat)} "
          f"K_mode={summary.K_mode} mean_RI={summary.mean_RI:.3f}")
    for path in written:
        print(f"  wrote {path}")
    return 0


def cmd_select_r(args) -> int:
    cfg = _merge_config(args, {**_FIT_DEFAULTS, "r_grid": "1.0:2.0:0.1",
                               "auto_extend": False})
    cfg.pop("r", None)
    cfg["outdir"] = cfg["outdir"] or _default_outdir()
    grid, pattern, covariates, hyper, config = _build_model_inputs(cfg)
    data = prepare_fit_data(pattern, grid, covariates)
    r_grid = _parse_r_grid(cfg["r_grid"])
    t0 = time.time()
    result = select_r(
        data,
        r_grid,
        hyper,
        config,
        keep_chains="best",
        dahl_thin=cfg["dahl_thin"],
        auto_extend=cfg["auto_extend"],
    )
    outdir = Path(cfg["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [
        [f"{rec.r:.10g}", f"{rec.bitc:.10g}", f"{rec.lpml:.10g}",
         f"{rec.dic:.10g}", f"{rec.mse:.10g}", rec.K_hat, f"{rec.mean_RI:.10g}"]
        for rec in result.records
    ]
    pio._write_csv(
        outdir / "criteria_by_r.csv",
        ["r", "BITC", "LPML", "DIC", "MSE", "K_hat", "mean_RI"],
        rows,
    )
    best = result.best
    written = pio.export_results(
        best.summary,
        best.chain,
        grid,
        outdir,
        criteria=_criteria_dict(best.chain, best.summary),
        run_meta={**_run_meta(cfg, best.chain, time.time() - t0),
                  "r_opt_bitc": result.r_opt_bitc},
    )
    print(f"select-r: optimal r = {result.r_opt_bitc:g} "
          f"(K_hat={best.K_hat}, BITC={best.bitc:.2f})")
    for rec in result.records:
        marker = " *" if rec.r == result.r_opt_bitc else ""
        print(f"  r={rec.r:.2f} BITC={rec.bitc:.2f} K_hat={rec.K_hat}{marker}")
    print(f"  wrote {outdir / 'criteria_by_r.csv'} and fit artifacts for the best r")
    return 0


def cmd_simulate(args) -> int:
    cfg = _merge_config(args, {"setting": "1", "seed": 0, "outdir": None})
    cfg["outdir"] = cfg["outdir"] or _default_outdir()
    setting_id = {"1": 1, "2": 2}.get(str(cfg["setting"]), cfg["setting"])
    sim = make_setting(setting_id, make_rng(cfg["seed"]))
    outdir = Path(cfg["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    pio.export_points(sim.pattern, outdir / "points.csv")
    pio.export_covariates(sim.covariates, outdir / "covariates.csv")
    pio.export_truth(sim.setting, outdir / "truth.csv")
    region = sim.grid.region
    meta = {
        "setting": str(cfg["setting"]),
        "seed": cfg["seed"],
        "n_points": sim.pattern.n_points,
        "nx": sim.grid.nx,
        "ny": sim.grid.ny,
        "region": [region.x_min, region.x_max, region.y_min, region.y_max],
        "lambda0_true": [float(v) for v in sim.setting.lambda0],
        "beta_true": [float(v) for v in sim.setting.beta],
    }
    with (outdir / "sim_meta.json").open("w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"simulate: setting {cfg['setting']} -> N={sim.pattern.n_points} points, "
          f"{sim.grid.n} boxes; wrote {outdir}/points.csv, covariates.csv, truth.csv")
    return 0


def cmd_study(args) -> int:
    defaults = {
        "setting": "1",
        "replicates": 20,
        "r_grid": "1.0:2.0:0.1",
        "outdir": None,
        "iters": 5000,
        "burn_in": 1000,
        "thin": 1,
        "seed": 0,
        "k_init": 5,
        "proposal_sd": 0.05,
        "dahl_thin": 1,
        "verbose": False,
    }
    cfg = _merge_config(args, defaults)
    cfg["outdir"] = cfg["outdir"] or _default_outdir()
    setting_id = {"1": 1, "2": 2}.get(str(cfg["setting"]), cfg["setting"])
    hyper = Hyperparams(proposal_sd=cfg["proposal_sd"])
    config = SamplerConfig(
        n_iter=cfg["iters"],
        burn_in=cfg["burn_in"],
        thin=cfg["thin"],
        seed=cfg["seed"],
        k_init=cfg["k_init"],
    )
    report = run_replicates(
        setting_id,
        cfg["replicates"],
        hyper,
        config,
        _parse_r_grid(cfg["r_grid"]),
        dahl_thin=cfg["dahl_thin"],
        verbose=cfg["verbose"],
    )
    written = pio.export_study(report, cfg["outdir"])
    acc = report.selection_accuracy()
    print(f"study: setting {cfg['setting']}, R={report.R}")
    print(f"  K_hat at optimal r: {np.bincount(report.K_opt).tolist()}")
    print(f"  selection accuracy: {[f'{100 * v:.0f}%' for v in acc]}")
    print(f"  mean RI r=1 vs opt: {report.mean_ri_r1.mean():.3f} vs "
          f"{report.mean_ri_opt.mean():.3f}")
    for path in written:
        print(f"  wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcrpnhpp",
        description="Spatial Poisson point-process regression with a "
        "piecewise-constant baseline and spike-slab variable selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", help="fit the model at one power r",
                        argument_default=argparse.SUPPRESS)
    _add_fit_options(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("select-r", help="grid search over the power r",
                        argument_default=argparse.SUPPRESS)
    _add_fit_options(sp, with_r=False)
    sp.add_argument("--r-grid", dest="r_grid",
                    help="'start:stop:step' or comma list (default 1.0:2.0:0.1)")
    sp.add_argument("--auto-extend", dest="auto_extend", action="store_true",
                    default=argparse.SUPPRESS,
                    help="extend the grid until a single component is selected")
    sp.set_defaults(func=cmd_select_r)

    sp = sub.add_parser("simulate", help="generate a synthetic dataset",
                        argument_default=argparse.SUPPRESS)
    sp.add_argument("--config")
    sp.add_argument("--setting", help="1, 2, or survey")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--outdir")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("study", help="replicate study with r selection",
                        argument_default=argparse.SUPPRESS)
    sp.add_argument("--config")
    sp.add_argument("--setting", help="1, 2, or survey")
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--r-grid", dest="r_grid")
    sp.add_argument("--iters", type=int)
    sp.add_argument("--burn-in", dest="burn_in", type=int)
    sp.add_argument("--thin", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--k-init", dest="k_init", type=int)
    sp.add_argument("--proposal-sd", dest="proposal_sd", type=float)
    sp.add_argument("--dahl-thin", dest="dahl_thin", type=int)
    sp.add_argument("--outdir")
    sp.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
