"""Posterior summaries for chains with a varying number of components.

Labels and baseline values change meaning from draw to draw, so the partition
is summarized by the draw whose membership matrix is closest (least squares)
to the across-draw mean membership matrix; everything label-invariant (Rand
index traces, per-box baseline percentiles, K) is summarized directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .sampler import ChainSample


@dataclass(frozen=True)
class DahlEstimate:
    """Least-squares partition point estimate selected from the sample."""

    t_star: int              # 0-based index of the selected retained draw
    z_hat: np.ndarray        # (n,) int64 labels of that draw
    lambda0_hat: np.ndarray  # (K_hat,) baseline of that draw
    K_hat: int


@dataclass(frozen=True)
class PosteriorSummary:
    beta_mean: np.ndarray
    beta_sd: np.ndarray
    hpd_intervals: np.ndarray  # (p, 2)
    gamma_prob: np.ndarray     # posterior P(slab) per coefficient
    selected: np.ndarray       # bool, gamma_prob > 0.5
    K_mode: int
    K_mode_freq: int
    K_sd: float
    z_hat: np.ndarray
    lambda0_hat: np.ndarray
    t_star: int
    mean_RI: float


def membership_matrix(z) -> np.ndarray:
    """Dense 0/1 matrix B with B[i, j] = 1 iff boxes i and j share a label."""
    z = np.asarray(z)
    return (z[:, None] == z[None, :]).astype(np.int8)


def membership_mean(z_matrix: np.ndarray) -> np.ndarray:
    """Element-wise mean of the per-draw membership matrices, accumulated
    draw by draw (never materializes more than one n x n matrix)."""
    return _core.membership_mean(np.ascontiguousarray(z_matrix, dtype=np.int32))


def dahl_estimate(chain: ChainSample, thin: int = 1) -> DahlEstimate:
    """Select the retained draw minimizing the squared distance between its
    membership matrix and the mean membership matrix.

    Ties break toward the smallest draw index.  ``thin`` considers every
    thin-th retained draw (both for the mean and the candidates) to bound the
    O(M n^2) cost on long chains; the returned index always refers to the
    original retained sample.
    """
    if chain.M < 1:
        raise ValueError("empty chain")
    sub = np.ascontiguousarray(chain.z[::thin], dtype=np.int32)
    if np.all(chain.K_trace[::thin] == 1):
        t_sub = 0  # every draw is the same single-component partition
    else:
        bbar = _core.membership_mean(sub)
        losses = _core.dahl_losses(sub, bbar)
        t_sub = int(np.argmin(losses))
    t_star = t_sub * thin
    state = chain.state(t_star)
    return DahlEstimate(
        t_star=t_star,
        z_hat=state.z,
        lambda0_hat=state.lambda0,
        K_hat=state.K,
    )


def rand_index(z1, z2) -> float:
    """Fraction of box pairs on which two partitions agree (both together or
    both apart), via the contingency table in O(n + K1*K2)."""
    z1 = np.asarray(z1, dtype=np.int64)
    z2 = np.asarray(z2, dtype=np.int64)
    if z1.shape != z2.shape:
        raise ValueError("label vectors must have equal length")
    n = z1.shape[0]
    if n < 2:
        raise ValueError("need at least two items")
    k1 = int(z1.max())
    k2 = int(z2.max())
    ct = np.bincount((z1 - 1) * k2 + (z2 - 1), minlength=k1 * k2).astype(float)
    pairs = ct @ (ct - 1) / 2.0
    row = ct.reshape(k1, k2).sum(axis=1)
    col = ct.reshape(k1, k2).sum(axis=0)
    same1 = row @ (row - 1) / 2.0
    same2 = col @ (col - 1) / 2.0
    total = n * (n - 1) / 2.0
    a = pairs
    b = total - same1 - same2 + pairs
    return float((a + b) / total)


def ri_trace(chain: ChainSample, z_hat) -> tuple:
    """Rand index of every retained draw against a reference partition;
    returns (length-M trace, mean)."""
    z_hat = np.asarray(z_hat, dtype=np.int64)
    trace = np.empty(chain.M)
    for t in range(chain.M):
        trace[t] = rand_index(chain.z[t], z_hat)
    return trace, float(trace.mean())


def _window_span(n_samples: int, level: float) -> int:
    return min(n_samples - 1, int(np.ceil(level * n_samples)))


def hpd_interval(samples, level: float = 0.95) -> tuple:
    """Shortest credible interval from sorted order statistics.

    Scans every window spanning ceil(level * M) order statistics and returns
    the narrowest (first on ties).  Requires at least 50 samples.
    """
    s = np.sort(np.asarray(samples, dtype=float))
    m = s.shape[0]
    if m < 50:
        raise ValueError(f"need at least 50 samples for an HPD interval, got {m}")
    span = _window_span(m, level)
    widths = s[span:] - s[: m - span]
    i = int(np.argmin(widths))
    return float(s[i]), float(s[i + span])


def equal_tailed_interval(samples, level: float = 0.95) -> tuple:
    """Equal-tail-count interval with the same order-statistic span as
    ``hpd_interval`` (so the HPD interval is never wider)."""
    s = np.sort(np.asarray(samples, dtype=float))
    m = s.shape[0]
    span = _window_span(m, level)
    lo = (m - 1 - span) // 2
    return float(s[lo]), float(s[lo + span])


def summarize(
    chain: ChainSample,
    level: float = 0.95,
    dahl_thin: int = 1,
    dahl: DahlEstimate | None = None,
    mean_ri: float | None = None,
) -> PosteriorSummary:
    """Full posterior summary of one chain.

    Coefficients get posterior means/SDs with HPD intervals; a covariate is
    flagged selected when its posterior slab probability exceeds 1/2 (the
    posterior mode of the indicator).  The partition is summarized by the
    least-squares draw and the mean Rand index of the chain against it.
    HPD intervals are NaN when fewer than 50 draws were retained.  Callers
    that already ran the partition pass can hand in ``dahl``/``mean_ri``.
    """
    if chain.M < 1:
        raise ValueError("empty chain")
    if dahl is None:
        dahl = dahl_estimate(chain, thin=dahl_thin)
    if mean_ri is None:
        _, mean_ri = ri_trace(chain, dahl.z_hat)
    p = chain.p
    hpd = np.full((p, 2), np.nan)
    if chain.M >= 50:
        for j in range(p):
            hpd[j] = hpd_interval(chain.beta[:, j], level)
    k_counts = np.bincount(chain.K_trace)
    k_mode = int(np.argmax(k_counts))
    gamma_prob = chain.gamma.mean(axis=0) if p else np.zeros(0)
    return PosteriorSummary(
        beta_mean=chain.beta.mean(axis=0),
        beta_sd=chain.beta.std(axis=0, ddof=1) if chain.M > 1 else np.zeros(p),
        hpd_intervals=hpd,
        gamma_prob=gamma_prob,
        selected=gamma_prob > 0.5,
        K_mode=k_mode,
        K_mode_freq=int(k_counts[k_mode]),
        K_sd=float(chain.K_trace.std(ddof=1)) if chain.M > 1 else 0.0,
        z_hat=dahl.z_hat,
        lambda0_hat=dahl.lambda0_hat,
        t_star=dahl.t_star,
        mean_RI=mean_ri,
    )


def baseline_percentiles(chain: ChainSample, qs=(2.5, 50.0, 97.5)) -> np.ndarray:
    """Per-box percentiles of the baseline draws, shape (len(qs), n)."""
    return np.percentile(chain.lambda_box, qs, axis=0)
