"""Synthetic data generation and the replicate study harness.

Points are generated exactly for a piecewise-constant intensity: the count in
each box is Poisson with mean intensity times box area, and locations are
uniform within the box (no thinning involved).  Two stock configurations
mirror a two- and a three-component baseline on a 20 x 20 unit grid; a larger
"survey-shaped" configuration exercises the pipeline at realistic scale.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model import (
    CovariateField,
    FitData,
    GridPartition,
    Hyperparams,
    ModelState,
    PointPattern,
    Region,
    prepare_fit_data,
)
from .sampler import ChainSample, SamplerConfig, make_rng, run_chain
from .selection import RGridResult, chain_mse, select_r


@dataclass(frozen=True)
class SimSetting:
    """A data-generating configuration: grid, true labels, true parameters."""

    name: str
    grid: GridPartition
    z0: np.ndarray        # (n,) true component labels, 1..K
    lambda0: np.ndarray   # (K,) true baselines
    beta: np.ndarray      # (p,) true coefficients
    p: int

    @property
    def n_components(self) -> int:
        return self.lambda0.shape[0]

    def true_state(self) -> ModelState:
        return ModelState(
            z=self.z0.copy(),
            lambda0=self.lambda0.copy(),
            beta=self.beta.copy(),
            gamma=(self.beta != 0).astype(np.int8),
        )


@dataclass(frozen=True)
class SimulatedData:
    setting: SimSetting
    covariates: CovariateField
    pattern: PointPattern

    @property
    def grid(self) -> GridPartition:
        return self.setting.grid

    def fit_data(self) -> FitData:
        return prepare_fit_data(self.pattern, self.grid, self.covariates)


def sample_nhpp(
    grid: GridPartition,
    lambda_box,
    rng: np.random.Generator,
) -> PointPattern:
    """Draw a point pattern with constant intensity ``lambda_box[i]`` on box i.

    Counts are Poisson(lambda_i * mu(A_i)); locations are uniform in the box.
    """
    lam = np.asarray(lambda_box, dtype=float)
    if lam.shape != (grid.n,):
        raise ValueError(f"need one intensity per box, got shape {lam.shape}")
    if np.any(lam < 0):
        raise ValueError("intensities must be >= 0")
    counts = rng.poisson(lam * grid.box_area)
    total = int(counts.sum())
    if total == 0:
        return PointPattern(np.empty((0, 2)))
    box = np.repeat(np.arange(grid.n), counts)
    ix = box % grid.nx
    iy = box // grid.nx
    u = rng.random((total, 2))
    x = grid.region.x_min + (ix + u[:, 0]) * grid.dx
    y = grid.region.y_min + (iy + u[:, 1]) * grid.dy
    return PointPattern(np.column_stack([x, y]))


def _block(grid: GridPartition, ix0, ix1, iy0, iy1) -> np.ndarray:
    """Flat indices of the inclusive box rectangle [ix0..ix1] x [iy0..iy1]."""
    ix, iy = np.meshgrid(np.arange(ix0, ix1 + 1), np.arange(iy0, iy1 + 1))
    return (iy.ravel() * grid.nx + ix.ravel()).astype(np.int64)


def _setting_one() -> SimSetting:
    grid = GridPartition.make(Region(0.0, 20.0, 0.0, 20.0), 20, 20)
    z0 = np.ones(grid.n, dtype=np.int64)
    z0[_block(grid, 3, 15, 6, 12)] = 2  # 13 x 7 = 91 boxes
    return SimSetting(
        name="setting1",
        grid=grid,
        z0=z0,
        lambda0=np.array([0.2, 10.0]),
        beta=np.array([0.5, 0.5, 0.0, 0.0]),
        p=4,
    )


def _setting_two() -> SimSetting:
    grid = GridPartition.make(Region(0.0, 20.0, 0.0, 20.0), 20, 20)
    z0 = np.ones(grid.n, dtype=np.int64)
    z0[_block(grid, 1, 13, 2, 8)] = 2    # 13 x 7 = 91 boxes
    z0[_block(grid, 8, 18, 12, 18)] = 3  # 11 x 7 = 77 boxes
    return SimSetting(
        name="setting2",
        grid=grid,
        z0=z0,
        lambda0=np.array([0.2, 5.0, 20.0]),
        beta=np.array([0.5, 0.5, 0.0, 0.0]),
        p=4,
    )


def _setting_survey() -> SimSetting:
    """Survey-plot-shaped configuration: 1000 x 500 region, 50 x 25 grid of
    20 x 20 boxes rescaled to unit area, 15 covariates, 4 components."""
    grid = GridPartition.make(Region(0.0, 1000.0, 0.0, 500.0), 50, 25, unit_area=True)
    z0 = np.ones(grid.n, dtype=np.int64)
    z0[_block(grid, 35, 44, 0, 24)] = 2   # 10 x 25 = 250
    z0[_block(grid, 10, 19, 5, 14)] = 3   # 10 x 10 = 100
    z0[_block(grid, 22, 26, 15, 24)] = 4  # 5 x 10 = 50
    beta = np.zeros(15)
    beta[0], beta[1], beta[3], beta[10] = 0.7, 0.65, 0.5, -0.4
    return SimSetting(
        name="survey",
        grid=grid,
        z0=z0,
        lambda0=np.array([0.4, 2.0, 6.0, 12.0]),
        beta=beta,
        p=15,
    )


_SETTINGS = {1: _setting_one, 2: _setting_two, "survey": _setting_survey}


def get_setting(setting_id) -> SimSetting:
    try:
        return _SETTINGS[setting_id]()
    except KeyError:
        raise ValueError(f"unknown setting {setting_id!r}; use 1, 2, or 'survey'")


def make_setting(setting_id, rng: np.random.Generator) -> SimulatedData:
    """Generate one replicate of a stock configuration.

    Covariates are iid standard normal per box; the pattern is drawn from
    the true piecewise-constant intensity lambda0[z0] * exp(X'beta).
    """
    setting = get_setting(setting_id)
    grid = setting.grid
    values = rng.standard_normal((grid.n, setting.p))
    covariates = CovariateField(grid=grid, values=values)
    lam_box = setting.lambda0[setting.z0 - 1] * np.exp(values @ setting.beta)
    pattern = sample_nhpp(grid, lam_box, rng)
    return SimulatedData(setting=setting, covariates=covariates, pattern=pattern)


@dataclass
class StudyReport:
    """Per-replicate records of the r-grid study plus the constant-baseline
    competitor, with Table-style aggregation helpers."""

    setting_name: str
    r_grid: np.ndarray
    beta_true: np.ndarray
    r_opt: np.ndarray        # (R,)
    K_opt: np.ndarray        # (R,) K_hat at the BITC-optimal r
    K_r1: np.ndarray         # (R,) K_hat at r = 1
    mean_ri_opt: np.ndarray  # (R,)
    mean_ri_r1: np.ndarray   # (R,)
    beta_mean: np.ndarray    # (R, p) posterior means at optimal r
    beta_sd: np.ndarray      # (R, p) posterior SDs at optimal r
    selected: np.ndarray     # (R, p) bool at optimal r
    mse_model: np.ndarray    # (R,) at optimal r
    mse_const: np.ndarray    # (R,) fixed single-component fit
    K_by_r: np.ndarray       # (R, len(r_grid)) K_hat per candidate power
    ri_trace_opt: np.ndarray  # (R, M)
    ri_trace_r1: np.ndarray   # (R, M)

    @property
    def R(self) -> int:
        return self.r_opt.shape[0]

    def selection_accuracy(self) -> np.ndarray:
        """Per-coefficient fraction of replicates selecting correctly."""
        truth = self.beta_true != 0
        return (self.selected == truth).mean(axis=0)

    def bias(self) -> np.ndarray:
        return self.beta_mean.mean(axis=0) - self.beta_true

    def empirical_sd(self) -> np.ndarray:
        if self.R < 2:
            return np.full(self.beta_true.shape[0], np.nan)
        return self.beta_mean.std(axis=0, ddof=1)

    def mean_posterior_sd(self) -> np.ndarray:
        return self.beta_sd.mean(axis=0)

    def write_csv(self, outdir) -> None:
        from . import io as _io

        _io.export_study(self, outdir)


def run_replicates(
    setting_id,
    R: int,
    hyper: Hyperparams,
    config: SamplerConfig,
    r_grid,
    *,
    dahl_thin: int = 1,
    verbose: bool = False,
) -> StudyReport:
    """Generate R replicates, run the r-grid selection on each, and fit the
    fixed single-component competitor; collects everything the study tables
    and figures need.  Replicate streams derive from config.seed."""
    if R < 1:
        raise ValueError("need at least one replicate")
    r_values = np.atleast_1d(np.asarray(r_grid, dtype=float))
    if 1.0 not in r_values:
        raise ValueError("the r grid must include 1.0 for the baseline comparison")
    setting = get_setting(setting_id)
    p = setting.p
    M = config.n_retained

    rep_rows = {
        "r_opt": np.empty(R),
        "K_opt": np.empty(R, dtype=np.int64),
        "K_r1": np.empty(R, dtype=np.int64),
        "mean_ri_opt": np.empty(R),
        "mean_ri_r1": np.empty(R),
        "mse_model": np.empty(R),
        "mse_const": np.empty(R),
    }
    beta_mean = np.empty((R, p))
    beta_sd = np.empty((R, p))
    selected = np.empty((R, p), dtype=bool)
    K_by_r = np.empty((R, r_values.shape[0]), dtype=np.int64)
    ri_opt = np.empty((R, M))
    ri_r1 = np.empty((R, M))

    for rep in range(R):
        t0 = time.time()
        ss = np.random.SeedSequence(entropy=config.seed, spawn_key=(100 + rep,))
        data_seed, chain_seed, const_seed = (
            int(s) for s in ss.generate_state(3, dtype=np.uint64)
        )
        sim = make_setting(setting_id, make_rng(data_seed))
        data = sim.fit_data()
        result = select_r(
            data,
            r_values,
            hyper,
            config.with_seed(chain_seed),
            keep_chains="none",
            dahl_thin=dahl_thin,
        )
        best = result.best
        rec_r1 = result.record_for(1.0)
        const_chain = run_chain(
            hyper=hyper,
            config=_const_config(config, const_seed),
            data=data,
        )
        rep_rows["r_opt"][rep] = result.r_opt_bitc
        rep_rows["K_opt"][rep] = best.K_hat
        rep_rows["K_r1"][rep] = rec_r1.K_hat
        rep_rows["mean_ri_opt"][rep] = best.mean_RI
        rep_rows["mean_ri_r1"][rep] = rec_r1.mean_RI
        rep_rows["mse_model"][rep] = best.mse
        rep_rows["mse_const"][rep] = chain_mse(const_chain)
        beta_mean[rep] = best.summary.beta_mean
        beta_sd[rep] = best.summary.beta_sd
        selected[rep] = best.summary.selected
        K_by_r[rep] = [rec.K_hat for rec in result.records[: r_values.shape[0]]]
        ri_opt[rep] = best.ri_trace
        ri_r1[rep] = rec_r1.ri_trace
        if verbose:
            print(
                f"[{setting.name} rep {rep + 1}/{R}] r_opt={result.r_opt_bitc:.2f} "
                f"K_opt={best.K_hat} K_r1={rec_r1.K_hat} "
                f"mse={best.mse:.2f}/{rep_rows['mse_const'][rep]:.2f} "
                f"({time.time() - t0:.1f}s)",
                flush=True,
            )

    return StudyReport(
        setting_name=setting.name,
        r_grid=r_values,
        beta_true=setting.beta,
        r_opt=rep_rows["r_opt"],
        K_opt=rep_rows["K_opt"],
        K_r1=rep_rows["K_r1"],
        mean_ri_opt=rep_rows["mean_ri_opt"],
        mean_ri_r1=rep_rows["mean_ri_r1"],
        beta_mean=beta_mean,
        beta_sd=beta_sd,
        selected=selected,
        mse_model=rep_rows["mse_model"],
        mse_const=rep_rows["mse_const"],
        K_by_r=K_by_r,
        ri_trace_opt=ri_opt,
        ri_trace_r1=ri_r1,
    )


def _const_config(config: SamplerConfig, seed: int) -> SamplerConfig:
    from dataclasses import replace

    return replace(config, fixed_K1=True, seed=seed)
