"""Joint-distribution correctness harness.

Compares moments of functionals of (parameters, data) under two samplers
that must share a stationary distribution if the Gibbs kernel is correct:

* marginal-conditional: parameters from the prior, data from the model;
* successive-conditional: alternate one full Gibbs sweep against the current
  data with regeneration of the data from the current parameters.

Run at power r = 1, where the label full conditional is exact (the powered
prior is not exchangeable for r > 1, so its sequential form and the
conditional form define different laws there).
"""

import numpy as np

from pcrpnhpp import Hyperparams, make_rng, pcrp_sample
from pcrpnhpp.model import ModelState
from pcrpnhpp.sampler import GibbsStepper

N_FUNCTIONALS = 5
FUNCTIONAL_NAMES = ("beta", "beta_sq", "mean_baseline", "K", "N")


def geweke_hyper() -> Hyperparams:
    # moderate slab/proposal keep the prior-predictive counts finite-sized;
    # any fixed values are valid for the joint-distribution check
    return Hyperparams(
        a=1.0, b=1.0, alpha=1.0, r=1.0,
        v_spike=0.25, v_slab=1.0, pi_gamma=0.5, proposal_sd=0.3,
    )


def fixed_covariates(n: int, p: int = 1) -> np.ndarray:
    return make_rng(20240601).standard_normal((n, p))


def prior_draw(n: int, X: np.ndarray, hyper: Hyperparams, rng) -> ModelState:
    z = pcrp_sample(n, hyper.alpha, hyper.r, rng)
    K = int(z.max())
    lam0 = rng.gamma(hyper.a, 1.0 / hyper.b, size=K)
    p = X.shape[1]
    gamma = (rng.random(p) < hyper.pi_gamma).astype(np.int8)
    sd = np.where(gamma == 1, np.sqrt(hyper.v_slab), np.sqrt(hyper.v_spike))
    beta = rng.normal(0.0, sd)
    return ModelState(z=z, lambda0=lam0, beta=beta, gamma=gamma)


def simulate_counts(lam_box, beta, X, rng) -> np.ndarray:
    mu = lam_box * np.exp(X @ beta)
    return rng.poisson(mu).astype(np.int64)


def functionals(beta0, lam_box, K, m) -> tuple:
    return (
        float(beta0),
        float(beta0) ** 2,
        float(np.mean(lam_box)),
        float(K),
        float(m.sum()),
    )


def run_marginal(n_samples: int, n: int, X, hyper, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    out = np.empty((n_samples, N_FUNCTIONALS))
    for s in range(n_samples):
        state = prior_draw(n, X, hyper, rng)
        lam_box = state.baseline_per_box()
        m = simulate_counts(lam_box, state.beta, X, rng)
        out[s] = functionals(state.beta[0], lam_box, state.K, m)
    return out


def run_successive(n_samples: int, n: int, X, hyper, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    state = prior_draw(n, X, hyper, rng)
    m = simulate_counts(state.baseline_per_box(), state.beta, X, rng)
    stepper = GibbsStepper(
        X_cell=X,
        cell_area=np.ones(n),
        cell_box=np.arange(n, dtype=np.int64),
        hyper=hyper,
        state=state,
        rng=rng,
    )
    out = np.empty((n_samples, N_FUNCTIONALS))
    for s in range(n_samples):
        stepper.set_counts(m)
        stepper.step()
        lam_box = stepper.baseline_per_box()
        m = simulate_counts(lam_box, stepper.beta, X, rng)
        out[s] = functionals(stepper.beta[0], lam_box, stepper.K, m)
    return out


def batch_means_se(series: np.ndarray, n_batches: int = 100) -> float:
    usable = (series.shape[0] // n_batches) * n_batches
    batches = series[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / np.sqrt(n_batches))


def z_scores(marginal: np.ndarray, successive: np.ndarray) -> np.ndarray:
    scores = np.empty(N_FUNCTIONALS)
    for f in range(N_FUNCTIONALS):
        m1 = marginal[:, f].mean()
        se1 = marginal[:, f].std(ddof=1) / np.sqrt(marginal.shape[0])
        m2 = successive[:, f].mean()
        se2 = batch_means_se(successive[:, f])
        scores[f] = (m1 - m2) / np.hypot(se1, se2)
    return scores
