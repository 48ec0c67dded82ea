"""Gibbs/Metropolis-Hastings sampler for the piecewise-constant NHPP model.

``run_chain`` drives a jitted kernel (see ``_core``) one full sweep per
iteration: label updates box by box, conjugate baseline draws, slab-indicator
draws, and one random-walk MH step per regression coefficient.  The
single-site update functions in this module are plain NumPy reference
implementations of the same conditionals; they mutate a ``ModelState`` in
place, draw from the supplied generator in the same order as the kernel, and
exist for unit tests and as an executable statement of the math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _core
from .model import (
    CovariateField,
    FitData,
    GridPartition,
    Hyperparams,
    ModelState,
    PointPattern,
    SufficientStats,
    prepare_fit_data,
    sufficient_stats,
)


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, retention, and adaptation settings."""

    n_iter: int = 5000
    burn_in: int = 1000
    thin: int = 1
    fixed_K1: bool = False
    adapt_proposal: bool = False
    target_accept_range: tuple = (0.30, 0.40)
    seed: int = 0
    k_init: int = 5
    random_scan: bool = False
    new_component_from_prior: bool = False
    adapt_window: int = 50

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.k_init < 1:
            raise ValueError("k_init must be >= 1")

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin

    def with_seed(self, seed: int) -> "SamplerConfig":
        return replace(self, seed=seed)


@dataclass
class ChainSample:
    """Retained draws in packed form plus per-draw traces.

    ``z`` holds the label vector of each retained draw; ``lambda_box`` the
    baseline value at every box (so row t evaluated at box i is
    lambda0^{(t)}_{z_i}).  ``draws`` materializes the same information as
    ``ModelState`` objects on demand.
    """

    z: np.ndarray           # (M, n) int32
    lambda_box: np.ndarray  # (M, n) float64
    beta: np.ndarray        # (M, p) float64
    gamma: np.ndarray       # (M, p) int8
    logL: np.ndarray        # (M,)
    K_trace: np.ndarray     # (M,) int32
    accept_rate: np.ndarray  # (p,) post burn-in acceptance fraction
    proposal_sd: np.ndarray  # (p,) step sizes in force after burn-in
    data: FitData
    hyper: Hyperparams
    config: SamplerConfig

    @property
    def M(self) -> int:
        return self.z.shape[0]

    @property
    def n(self) -> int:
        return self.z.shape[1]

    @property
    def p(self) -> int:
        return self.beta.shape[1]

    @property
    def n_points(self) -> int:
        return self.data.n_points

    def state(self, t: int) -> ModelState:
        """Materialize retained draw t as a ModelState."""
        k = int(self.K_trace[t])
        lam0 = np.empty(k)
        lam0[self.z[t] - 1] = self.lambda_box[t]
        return ModelState(
            z=self.z[t].astype(np.int64),
            lambda0=lam0,
            beta=self.beta[t].copy(),
            gamma=self.gamma[t].copy(),
        )

    @property
    def draws(self) -> list:
        return [self.state(t) for t in range(self.M)]


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from a seed or SeedSequence; streams are splittable."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def pcrp_sample(n: int, alpha: float, r: float, rng: np.random.Generator) -> np.ndarray:
    """Forward draw of the partition prior: sequential seating with weights
    size^r for existing components and alpha for a new one."""
    z = np.zeros(n, dtype=np.int64)
    z[0] = 1
    sizes = [1]
    for i in range(1, n):
        w = np.array([s**r for s in sizes] + [alpha], dtype=float)
        u = rng.random() * w.sum()
        c = int(np.searchsorted(np.cumsum(w), u))
        if c >= len(sizes):
            sizes.append(1)
            z[i] = len(sizes)
        else:
            sizes[c] += 1
            z[i] = c + 1
    return z


# ---------------------------------------------------------------------------
# single-site reference updates (NumPy mirrors of the jitted kernel)
# ---------------------------------------------------------------------------

def update_z(
    state: ModelState,
    stats: SufficientStats,
    hyper: Hyperparams,
    i: int,
    rng: np.random.Generator,
    new_component_from_prior: bool = False,
) -> int:
    """Resample the label of box i from its full conditional.

    If box i was the only member of its component, that component is removed
    and higher labels shift down before the draw.  Weights are computed in
    log space and normalized by log-sum-exp; a new component's baseline is
    drawn from its conditional gamma posterior unless
    ``new_component_from_prior`` asks for the plain prior draw.
    """
    K = state.K
    c_old = state.z[i] - 1
    counts = stats.boxes_per_component
    npts = stats.N_per_component
    if counts[c_old] == 1:
        keep = np.arange(K) != c_old
        state.lambda0 = state.lambda0[keep]
        stats.boxes_per_component = counts = counts[keep]
        stats.N_per_component = npts = npts[keep]
        state.z[state.z > c_old + 1] -= 1
        state.z[i] = 0
        K -= 1
    else:
        counts[c_old] -= 1
        npts[c_old] -= stats.m[i]

    mi = float(stats.m[i])
    Li = float(stats.LambdaI[i])
    a, b = hyper.a, hyper.b
    logw = np.empty(K + 1)
    logw[:K] = (
        hyper.r * np.log(counts)
        + mi * np.log(state.lambda0)
        - state.lambda0 * Li
    )
    logw[K] = (
        math.log(hyper.alpha)
        + a * math.log(b)
        + math.lgamma(mi + a)
        - (mi + a) * math.log(b + Li)
        - math.lgamma(a)
    )
    w = np.exp(logw - logw.max())
    u = rng.random() * w.sum()
    chosen = int(np.searchsorted(np.cumsum(w), u))
    if chosen >= K:
        if new_component_from_prior:
            lam_new = rng.gamma(a, 1.0 / b)
        else:
            lam_new = rng.gamma(mi + a, 1.0 / (b + Li))
        state.lambda0 = np.append(state.lambda0, lam_new)
        stats.boxes_per_component = np.append(counts, 1)
        stats.N_per_component = np.append(npts, stats.m[i])
        state.z[i] = K + 1
    else:
        counts[chosen] += 1
        npts[chosen] += stats.m[i]
        state.z[i] = chosen + 1
    return int(state.z[i])


def z_weights(
    state: ModelState,
    stats: SufficientStats,
    hyper: Hyperparams,
    i: int,
) -> np.ndarray:
    """Normalized conditional label probabilities for box i (existing
    components in label order, then a new component).  Assumes box i has
    already been removed from the component tallies."""
    mi = float(stats.m[i])
    Li = float(stats.LambdaI[i])
    a, b = hyper.a, hyper.b
    K = state.K
    logw = np.empty(K + 1)
    logw[:K] = (
        hyper.r * np.log(stats.boxes_per_component)
        + mi * np.log(state.lambda0)
        - state.lambda0 * Li
    )
    logw[K] = (
        math.log(hyper.alpha)
        + a * math.log(b)
        + math.lgamma(mi + a)
        - (mi + a) * math.log(b + Li)
        - math.lgamma(a)
    )
    w = np.exp(logw - logw.max())
    return w / w.sum()


def update_lambda0(
    state: ModelState,
    stats: SufficientStats,
    hyper: Hyperparams,
    k: int,
    rng: np.random.Generator,
) -> float:
    """Conjugate gamma draw for component k (1-based label)."""
    rate = hyper.b + float(stats.LambdaI[state.z == k].sum())
    shape = float(stats.N_per_component[k - 1]) + hyper.a
    state.lambda0[k - 1] = rng.gamma(shape, 1.0 / rate)
    return float(state.lambda0[k - 1])


def slab_probability(beta_j: float, hyper: Hyperparams) -> float:
    """Posterior probability that coefficient j sits in the slab."""
    return _core.gamma_rate(
        beta_j,
        hyper.v_spike,
        hyper.v_slab,
        math.log(hyper.pi_gamma),
        math.log(1.0 - hyper.pi_gamma),
    )


def update_gamma(
    state: ModelState,
    hyper: Hyperparams,
    j: int,
    rng: np.random.Generator,
) -> int:
    """Bernoulli draw of the slab indicator for coordinate j (0-based)."""
    rate = slab_probability(float(state.beta[j]), hyper)
    state.gamma[j] = 1 if rng.random() < rate else 0
    return int(state.gamma[j])


def update_beta(
    state: ModelState,
    stats: SufficientStats,
    data: FitData,
    hyper: Hyperparams,
    j: int,
    rng: np.random.Generator,
    proposal_sd: float | None = None,
) -> tuple:
    """One symmetric random-walk MH step for coefficient j (0-based).

    Returns (new beta_j, accepted flag).  On acceptance the cached
    integrated intensities in ``stats`` are refreshed.
    """
    sd = hyper.proposal_sd if proposal_sd is None else proposal_sd
    bj = float(state.beta[j])
    prop = bj + rng.normal(0.0, sd)
    delta = prop - bj
    v = hyper.v_slab if state.gamma[j] == 1 else hyper.v_spike
    xb = data.X_cell @ state.beta
    lam_new = np.bincount(
        data.cell_box,
        weights=data.cell_area * np.exp(xb + data.X_cell[:, j] * delta),
        minlength=data.n,
    )
    lam_box = state.baseline_per_box()
    dlog = (
        -0.5 * (prop * prop - bj * bj) / v
        + delta * float(data.m_cell @ data.X_cell[:, j])
        - float(lam_box @ (lam_new - stats.LambdaI))
    )
    accepted = math.log(rng.random()) < dlog
    if accepted:
        state.beta[j] = prop
        stats.LambdaI = lam_new
    return float(state.beta[j]), bool(accepted)


def beta_log_target(
    state: ModelState,
    stats: SufficientStats,
    data: FitData,
    hyper: Hyperparams,
    j: int,
    value: float,
) -> float:
    """Log full-conditional density of coefficient j at ``value``, up to an
    additive constant: the spike/slab prior log-density plus the likelihood
    terms that involve beta."""
    beta = state.beta.copy()
    beta[j] = value
    v = hyper.v_slab if state.gamma[j] == 1 else hyper.v_spike
    lam_int = data.lambda_boxes(beta)
    lam_box = state.baseline_per_box()
    return (
        -0.5 * value * value / v
        + float(data.m_cell @ (data.X_cell @ beta))
        - float(lam_box @ lam_int)
    )


def tune_proposal(
    proposal_sd: float,
    accept_history,
    target: float = 0.35,
    gain: float = 1.0,
) -> float:
    """Multiplicative step-size adjustment toward the target acceptance rate.

    Applied only during burn-in; the chain kept for inference runs with the
    step sizes frozen at their end-of-burn-in values.
    """
    rate = float(np.mean(accept_history))
    return proposal_sd * math.exp(gain * (rate - target))


def reference_iteration(
    state: ModelState,
    stats: SufficientStats,
    data: FitData,
    hyper: Hyperparams,
    rng: np.random.Generator,
    proposal_sd=None,
    fixed_K1: bool = False,
    new_component_from_prior: bool = False,
) -> None:
    """One full sweep composed from the single-site reference updates,
    mirroring the jitted kernel's update and RNG order exactly."""
    stats.LambdaI = data.lambda_boxes(state.beta)
    if not fixed_K1:
        for i in range(data.n):
            update_z(state, stats, hyper, i, rng, new_component_from_prior)
    for k in range(1, state.K + 1):
        update_lambda0(state, stats, hyper, k, rng)
    for j in range(data.p):
        update_gamma(state, hyper, j, rng)
    for j in range(data.p):
        sd = hyper.proposal_sd if proposal_sd is None else proposal_sd[j]
        update_beta(state, stats, data, hyper, j, rng, sd)


def initial_state(
    data: FitData,
    hyper: Hyperparams,
    config: SamplerConfig,
    rng: np.random.Generator,
) -> ModelState:
    """Starting point: uniform labels on 1..K0 (relabeled to be contiguous),
    prior baseline draws, and zero coefficients/indicators."""
    n, p = data.n, data.p
    if config.fixed_K1 or n == 1:
        z = np.ones(n, dtype=np.int64)
    else:
        z = rng.integers(1, config.k_init + 1, size=n)
        _, inverse = np.unique(z, return_inverse=True)
        z = (inverse + 1).astype(np.int64)
    K = int(z.max())
    lambda0 = rng.gamma(hyper.a, 1.0 / hyper.b, size=K)
    return ModelState(
        z=z,
        lambda0=lambda0,
        beta=np.zeros(p),
        gamma=np.zeros(p, dtype=np.int8),
    )


class GibbsStepper:
    """One-iteration driver over raw arrays, for harnesses that interleave
    sampling with data regeneration (the box counts may change step to step).

    The stepper owns the component/cache buffers; ``set_counts`` swaps in new
    per-box counts, ``step`` advances the chain one full sweep.
    """

    def __init__(
        self,
        X_cell: np.ndarray,
        cell_area: np.ndarray,
        cell_box: np.ndarray,
        hyper: Hyperparams,
        state: ModelState,
        rng: np.random.Generator,
        fixed_K1: bool = False,
        new_component_from_prior: bool = False,
    ):
        n = int(cell_box.max()) + 1
        ncell, p = X_cell.shape
        self.hyper = hyper
        self.rng = rng
        self.fixed_K1 = fixed_K1
        self.new_comp_mode = (
            _core.NEW_COMP_PRIOR if new_component_from_prior else _core.NEW_COMP_POSTERIOR
        )
        self.n, self.p = n, p
        self.X_cell = np.ascontiguousarray(X_cell, dtype=float)
        self.cell_area = np.ascontiguousarray(cell_area, dtype=float)
        self.cell_box = np.ascontiguousarray(cell_box, dtype=np.int64)
        self.z = state.z.astype(np.int64).copy()
        self.K = state.K
        self.lam = np.zeros(n + 1)
        self.lam[: self.K] = state.lambda0
        self.beta = state.beta.astype(float).copy()
        self.gamma = state.gamma.astype(np.int8).copy()
        self.counts = np.zeros(n + 1, dtype=np.int64)
        self.counts[: self.K] = np.bincount(self.z - 1, minlength=self.K)
        self.m = np.zeros(n, dtype=np.int64)
        self.m_cell = np.zeros(ncell, dtype=np.int64)
        self.m_x = np.zeros(p)
        self.npts = np.zeros(n + 1, dtype=np.int64)
        self._xb = np.zeros(ncell)
        self._lam_int = np.zeros(n)
        self._lam_int_tmp = np.zeros(n)
        self._logw = np.zeros(n + 2)
        self._comp_rate = np.zeros(n + 1)
        self._accept = np.zeros(max(p, 1), dtype=np.int64)
        self._order = np.arange(n, dtype=np.int64)
        self.prop_sd = np.full(p, hyper.proposal_sd)

    def set_counts(self, m: np.ndarray, m_cell: np.ndarray | None = None) -> None:
        self.m[:] = m
        self.m_cell[:] = m if m_cell is None else m_cell
        if self.p:
            self.m_x[:] = self.X_cell.T @ self.m_cell
        self.npts[: self.K] = np.bincount(self.z - 1, weights=self.m, minlength=self.K)
        self.npts[self.K:] = 0

    def step(self) -> None:
        h = self.hyper
        self.K = _core.gibbs_iteration(
            self.z,
            self.lam,
            self.counts,
            self.npts,
            self.K,
            self.beta,
            self.gamma,
            self._order,
            self.m,
            self.m_cell,
            self.m_x,
            self.X_cell,
            self.cell_area,
            self.cell_box,
            self._xb,
            self._lam_int,
            self._lam_int_tmp,
            self._logw,
            self._comp_rate,
            h.a,
            h.b,
            math.log(h.alpha),
            h.r,
            h.v_spike,
            h.v_slab,
            math.log(h.pi_gamma),
            math.log(1.0 - h.pi_gamma),
            self.prop_sd,
            self.fixed_K1,
            self.new_comp_mode,
            self._accept,
            self.rng,
        )

    def state(self) -> ModelState:
        return ModelState(
            z=self.z.copy(),
            lambda0=self.lam[: self.K].copy(),
            beta=self.beta.copy(),
            gamma=self.gamma.copy(),
        )

    def baseline_per_box(self) -> np.ndarray:
        return self.lam[self.z - 1]


def run_chain(
    pattern: PointPattern = None,
    grid: GridPartition = None,
    covariates: CovariateField | None = None,
    hyper: Hyperparams | None = None,
    config: SamplerConfig | None = None,
    *,
    data: FitData | None = None,
    rng: np.random.Generator | None = None,
    init: ModelState | None = None,
) -> ChainSample:
    """Run one MCMC chain and return the retained draws.

    Either ``pattern``/``grid`` (plus optional ``covariates``) or a prepared
    ``data`` bundle must be given.  The chain is a deterministic function of
    the data, settings, and seed.  In ``fixed_K1`` mode the label sweep is
    skipped and the baseline stays a single component.
    """
    hyper = hyper or Hyperparams()
    config = config or SamplerConfig()
    if data is None:
        data = prepare_fit_data(pattern, grid, covariates)
    if rng is None:
        rng = make_rng(config.seed)
    n, p, ncell = data.n, data.p, data.cell_area.shape[0]

    state = init.copy() if init is not None else initial_state(data, hyper, config, rng)
    state.validate()

    # working buffers (component arrays sized for the K = n worst case)
    z = state.z.copy()
    lam = np.zeros(n + 1)
    lam[: state.K] = state.lambda0
    counts = np.zeros(n + 1, dtype=np.int64)
    npts = np.zeros(n + 1, dtype=np.int64)
    counts[: state.K] = np.bincount(z - 1, minlength=state.K)
    npts[: state.K] = np.bincount(z - 1, weights=data.m, minlength=state.K)
    K = state.K
    beta = state.beta.copy()
    gamma = state.gamma.copy()
    xb_cell = np.zeros(ncell)
    lam_int = np.zeros(n)
    lam_int_tmp = np.zeros(n)
    logw = np.zeros(n + 2)
    comp_rate = np.zeros(n + 1)
    accept_iter = np.zeros(max(p, 1), dtype=np.int64)
    m_x = data.X_cell.T @ data.m_cell if p else np.zeros(0)
    prop_sd = np.full(p, hyper.proposal_sd)
    fixed_order = np.arange(n, dtype=np.int64)

    M = config.n_retained
    out_z = np.empty((M, n), dtype=np.int32)
    out_lam_box = np.empty((M, n))
    out_beta = np.empty((M, p))
    out_gamma = np.empty((M, p), dtype=np.int8)
    out_logL = np.empty(M)
    out_K = np.empty(M, dtype=np.int32)
    accept_total = np.zeros(p, dtype=np.int64)
    window = np.zeros(p, dtype=np.int64)

    log_pi = math.log(hyper.pi_gamma)
    log_1mpi = math.log(1.0 - hyper.pi_gamma)
    ret = 0
    for t in range(config.n_iter):
        order = rng.permutation(n) if config.random_scan else fixed_order
        K = _core.gibbs_iteration(
            z,
            lam,
            counts,
            npts,
            K,
            beta,
            gamma,
            order,
            data.m,
            data.m_cell,
            m_x,
            data.X_cell,
            data.cell_area,
            data.cell_box,
            xb_cell,
            lam_int,
            lam_int_tmp,
            logw,
            comp_rate,
            hyper.a,
            hyper.b,
            math.log(hyper.alpha),
            hyper.r,
            hyper.v_spike,
            hyper.v_slab,
            log_pi,
            log_1mpi,
            prop_sd,
            config.fixed_K1,
            _core.NEW_COMP_PRIOR
            if config.new_component_from_prior
            else _core.NEW_COMP_POSTERIOR,
            accept_iter,
            rng,
        )
        if t < config.burn_in:
            if config.adapt_proposal and p:
                window += accept_iter[:p]
                if (t + 1) % config.adapt_window == 0:
                    for j in range(p):
                        prop_sd[j] = tune_proposal(
                            prop_sd[j], window[j] / config.adapt_window
                        )
                    window[:] = 0
        else:
            accept_total += accept_iter[:p]
            if (t - config.burn_in + 1) % config.thin == 0 and ret < M:
                out_z[ret] = z
                out_lam_box[ret] = lam[z - 1]
                out_beta[ret] = beta
                out_gamma[ret] = gamma
                out_K[ret] = K
                out_logL[ret] = _core.log_likelihood_arrays(
                    z, lam, data.m, data.m_cell, xb_cell, lam_int
                )
                ret += 1

    return ChainSample(
        z=out_z,
        lambda_box=out_lam_box,
        beta=out_beta,
        gamma=out_gamma,
        logL=out_logL,
        K_trace=out_K,
        accept_rate=accept_total / max(config.n_iter - config.burn_in, 1),
        proposal_sd=prop_sd,
        data=data,
        hyper=hyper,
        config=config,
    )
