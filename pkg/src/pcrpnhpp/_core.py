"""Jitted inner loops for the Gibbs sampler and the partition summaries.

Conventions shared with the Python layer:

* component labels are 1-based values stored in int64 arrays; component
  attributes (lambda, box counts, point counts) live in 0-based buffers of
  capacity n + 1 so a sweep can transiently open one extra component;
* all categorical draws happen in log space with a log-sum-exp guard;
* every random variate comes from the ``np.random.Generator`` passed in, so
  chains are bit-reproducible across the pure-NumPy and jitted paths.
"""

import math

import numpy as np
from numba import njit

# new-component weight and instantiation modes
NEW_COMP_POSTERIOR = 0
NEW_COMP_PRIOR = 1


@njit(cache=True)
def refresh_intensity(beta, X_cell, cell_area, cell_box, xb_cell, lam_box_int):
    """Recompute xb = X'beta per cell and Lambda_i(beta) per box, in place."""
    ncell = cell_area.shape[0]
    p = beta.shape[0]
    for i in range(lam_box_int.shape[0]):
        lam_box_int[i] = 0.0
    for c in range(ncell):
        s = 0.0
        for j in range(p):
            s += X_cell[c, j] * beta[j]
        xb_cell[c] = s
        lam_box_int[cell_box[c]] += cell_area[c] * math.exp(s)


@njit(cache=True)
def draw_z_one(
    i,
    z,
    lam,
    counts,
    npts,
    K,
    m,
    lam_int,
    a,
    b,
    log_alpha,
    r,
    new_comp_mode,
    logw,
    rng,
):
    """Resample the label of box i from its full conditional; returns new K.

    A singleton component is deleted first (labels above it shift down one).
    Existing-component log weights are

        r * log(n_{-i,c}) + m_i * log(lam_c) - lam_c * Lambda_i

    and the new-component weight integrates the baseline against its gamma
    prior.  On a new label the baseline is instantiated from its conditional
    gamma posterior (or the plain prior in NEW_COMP_PRIOR mode).
    """
    n = z.shape[0]
    c_old = z[i] - 1
    if counts[c_old] == 1:
        for c in range(c_old, K - 1):
            lam[c] = lam[c + 1]
            counts[c] = counts[c + 1]
            npts[c] = npts[c + 1]
        K -= 1
        for j in range(n):
            if z[j] > c_old + 1:
                z[j] -= 1
        z[i] = 0
    else:
        counts[c_old] -= 1
        npts[c_old] -= m[i]

    mi = m[i]
    Li = lam_int[i]
    best = -1.0e308
    for c in range(K):
        w = r * math.log(counts[c]) + mi * math.log(lam[c]) - lam[c] * Li
        logw[c] = w
        if w > best:
            best = w
    w = (
        log_alpha
        + a * math.log(b)
        + math.lgamma(mi + a)
        - (mi + a) * math.log(b + Li)
        - math.lgamma(a)
    )
    logw[K] = w
    if w > best:
        best = w

    tot = 0.0
    for c in range(K + 1):
        tot += math.exp(logw[c] - best)
    u = rng.random() * tot
    acc = 0.0
    chosen = K
    for c in range(K + 1):
        acc += math.exp(logw[c] - best)
        if u <= acc:
            chosen = c
            break

    if chosen == K:
        if new_comp_mode == NEW_COMP_PRIOR:
            lam[K] = rng.gamma(a, 1.0 / b)
        else:
            lam[K] = rng.gamma(mi + a, 1.0 / (b + Li))
        counts[K] = 1
        npts[K] = mi
        K += 1
        z[i] = K
    else:
        counts[chosen] += 1
        npts[chosen] += mi
        z[i] = chosen + 1
    return K


@njit(cache=True)
def lambda_sweep(z, lam, K, npts, lam_int, a, b, comp_rate, rng):
    """Conjugate gamma draw for every component baseline, in place."""
    n = z.shape[0]
    for k in range(K):
        comp_rate[k] = b
    for i in range(n):
        comp_rate[z[i] - 1] += lam_int[i]
    for k in range(K):
        lam[k] = rng.gamma(npts[k] + a, 1.0 / comp_rate[k])


@njit(cache=True)
def gamma_rate(beta_j, v_spike, v_slab, log_pi, log_1mpi):
    """Posterior slab probability for one coefficient, computed in log space."""
    lw1 = log_pi - 0.5 * math.log(v_slab) - 0.5 * beta_j * beta_j / v_slab
    lw0 = log_1mpi - 0.5 * math.log(v_spike) - 0.5 * beta_j * beta_j / v_spike
    d = lw0 - lw1
    if d > 700.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(d))


@njit(cache=True)
def gamma_sweep(beta, gamma, v_spike, v_slab, log_pi, log_1mpi, rng):
    for j in range(beta.shape[0]):
        rate = gamma_rate(beta[j], v_spike, v_slab, log_pi, log_1mpi)
        gamma[j] = 1 if rng.random() < rate else 0


@njit(cache=True)
def beta_step(
    j,
    z,
    lam,
    beta,
    gamma,
    m_x,
    X_cell,
    cell_area,
    cell_box,
    xb_cell,
    lam_int,
    lam_int_tmp,
    v_spike,
    v_slab,
    prop_sd_j,
    rng,
):
    """One random-walk MH update of coefficient j; returns 1 on acceptance.

    The log target difference is the spike/slab prior term plus
    delta * sum_c m_c X_cj  minus the change in sum_i lam0_{z_i} Lambda_i.
    Caches (xb per cell, Lambda per box) are refreshed only on acceptance.
    """
    n = lam_int.shape[0]
    ncell = cell_area.shape[0]
    bj = beta[j]
    prop = bj + rng.normal(0.0, prop_sd_j)
    delta = prop - bj
    v = v_slab if gamma[j] == 1 else v_spike
    dlog = -0.5 * (prop * prop - bj * bj) / v + delta * m_x[j]
    for i in range(n):
        lam_int_tmp[i] = 0.0
    for c in range(ncell):
        lam_int_tmp[cell_box[c]] += cell_area[c] * math.exp(
            xb_cell[c] + X_cell[c, j] * delta
        )
    for i in range(n):
        dlog -= lam[z[i] - 1] * (lam_int_tmp[i] - lam_int[i])
    if math.log(rng.random()) < dlog:
        beta[j] = prop
        for c in range(ncell):
            xb_cell[c] += X_cell[c, j] * delta
        for i in range(n):
            lam_int[i] = lam_int_tmp[i]
        return 1
    return 0


@njit(cache=True)
def log_likelihood_arrays(z, lam, m, m_cell, xb_cell, lam_int):
    """Dropped-constant log-likelihood from the live sampler arrays."""
    total = 0.0
    for c in range(m_cell.shape[0]):
        total += m_cell[c] * xb_cell[c]
    for i in range(z.shape[0]):
        lam_i = lam[z[i] - 1]
        if m[i] > 0:
            total += m[i] * math.log(lam_i)
        total -= lam_i * lam_int[i]
    return total


@njit(cache=True)
def gibbs_iteration(
    z,
    lam,
    counts,
    npts,
    K,
    beta,
    gamma,
    order,
    m,
    m_cell,
    m_x,
    X_cell,
    cell_area,
    cell_box,
    xb_cell,
    lam_int,
    lam_int_tmp,
    logw,
    comp_rate,
    a,
    b,
    log_alpha,
    r,
    v_spike,
    v_slab,
    log_pi,
    log_1mpi,
    prop_sd,
    fixed_k1,
    new_comp_mode,
    accept_out,
    rng,
):
    """One full sweep: caches, labels, baselines, indicators, coefficients."""
    refresh_intensity(beta, X_cell, cell_area, cell_box, xb_cell, lam_int)
    if not fixed_k1:
        for t in range(order.shape[0]):
            K = draw_z_one(
                order[t],
                z,
                lam,
                counts,
                npts,
                K,
                m,
                lam_int,
                a,
                b,
                log_alpha,
                r,
                new_comp_mode,
                logw,
                rng,
            )
    lambda_sweep(z, lam, K, npts, lam_int, a, b, comp_rate, rng)
    gamma_sweep(beta, gamma, v_spike, v_slab, log_pi, log_1mpi, rng)
    for j in range(beta.shape[0]):
        accept_out[j] = beta_step(
            j,
            z,
            lam,
            beta,
            gamma,
            m_x,
            X_cell,
            cell_area,
            cell_box,
            xb_cell,
            lam_int,
            lam_int_tmp,
            v_spike,
            v_slab,
            prop_sd[j],
            rng,
        )
    return K


@njit(cache=True)
def membership_mean(zmat):
    """Mean membership matrix over draws: Bbar[i,j] = freq(z_i == z_j)."""
    n_draws, n = zmat.shape
    bsum = np.zeros((n, n))
    order = np.empty(n, dtype=np.int64)
    for t in range(n_draws):
        kmax = 0
        for i in range(n):
            if zmat[t, i] > kmax:
                kmax = zmat[t, i]
        cnt = np.zeros(kmax + 1, dtype=np.int64)
        for i in range(n):
            cnt[zmat[t, i]] += 1
        start = np.zeros(kmax + 2, dtype=np.int64)
        for k in range(1, kmax + 2):
            start[k] = start[k - 1] + cnt[k - 1]
        fill = start.copy()
        for i in range(n):
            lab = zmat[t, i]
            order[fill[lab]] = i
            fill[lab] += 1
        for k in range(1, kmax + 1):
            s, e = start[k], start[k] + cnt[k]
            for ai in range(s, e):
                row = order[ai]
                for bi in range(s, e):
                    bsum[row, order[bi]] += 1.0
    return bsum / n_draws


@njit(cache=True)
def dahl_losses(zmat, bbar):
    """Squared distance of each draw's membership matrix from the mean one."""
    n_draws, n = zmat.shape
    const = 0.0
    for i in range(n):
        for j in range(n):
            const += bbar[i, j] * bbar[i, j]
    losses = np.empty(n_draws)
    order = np.empty(n, dtype=np.int64)
    for t in range(n_draws):
        kmax = 0
        for i in range(n):
            if zmat[t, i] > kmax:
                kmax = zmat[t, i]
        cnt = np.zeros(kmax + 1, dtype=np.int64)
        for i in range(n):
            cnt[zmat[t, i]] += 1
        start = np.zeros(kmax + 2, dtype=np.int64)
        for k in range(1, kmax + 2):
            start[k] = start[k - 1] + cnt[k - 1]
        fill = start.copy()
        for i in range(n):
            lab = zmat[t, i]
            order[fill[lab]] = i
            fill[lab] += 1
        ones = 0.0
        cross = 0.0
        for k in range(1, kmax + 1):
            ones += cnt[k] * cnt[k]
            s, e = start[k], start[k] + cnt[k]
            for ai in range(s, e):
                row = order[ai]
                for bi in range(s, e):
                    cross += bbar[row, order[bi]]
        losses[t] = ones - 2.0 * cross + const
    return losses
