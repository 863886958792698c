"""Hot inner loops.

Every kernel exists twice: a loop version compiled with ``numba.njit`` and a
vectorised numpy version. The public wrappers pick one according to the
``GALZSL_DISABLE_NUMBA`` environment variable (read at import time) and fall
back to numpy when numba is not importable. Both versions are exported with
``_nb`` / ``_np`` suffixes so tests and the benchmark can compare them.
"""

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional extra
    numba = None
    HAVE_NUMBA = False


def _flag_disabled():
    return os.environ.get("GALZSL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _flag_disabled()


def njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def backend():
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------- phi matrix


@njit
def weighted_phi_nb(bits, weights):
    n, d = bits.shape
    wsum = 0.0
    for k in range(n):
        wsum += weights[k]
    mean = np.zeros(d)
    for k in range(n):
        for a in range(d):
            mean[a] += weights[k] * bits[k, a]
    for a in range(d):
        mean[a] /= wsum
    cov = np.zeros((d, d))
    row = np.empty(d)
    for k in range(n):
        w = weights[k]
        for a in range(d):
            row[a] = bits[k, a] - mean[a]
        for a in range(d):
            wa = w * row[a]
            if wa == 0.0:
                continue
            for b in range(a, d):
                cov[a, b] += wa * row[b]
    const = np.ones(d, dtype=np.bool_)
    for a in range(d):
        for k in range(1, n):
            if bits[k, a] != bits[0, a]:
                const[a] = False
                break
    out = np.zeros((d, d))
    for a in range(d):
        for b in range(a, d):
            den = cov[a, a] * cov[b, b]
            if const[a] or const[b] or cov[a, a] <= 0.0 or cov[b, b] <= 0.0:
                r = 0.0
            else:
                r = cov[a, b] / np.sqrt(den)
                if r > 1.0:
                    r = 1.0
                elif r < -1.0:
                    r = -1.0
            out[a, b] = r
            out[b, a] = r
    return out


def weighted_phi_np(bits, weights):
    bits = np.asarray(bits, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    mean = w @ bits / w.sum()
    centred = bits - mean
    cov = (centred * w[:, None]).T @ centred
    var = np.diag(cov).copy()
    ok = (var > 0.0) & np.any(bits != bits[:1], axis=0)
    safe = np.where(ok, var, 1.0)
    out = cov / np.sqrt(np.outer(safe, safe))
    out[~ok, :] = 0.0
    out[:, ~ok] = 0.0
    np.clip(out, -1.0, 1.0, out=out)
    return (out + out.T) / 2.0


# ---------------------------------------------------------------- delta corr


@njit
def delta_corr_matrix_nb(rho_s, rho_u):
    d = rho_s.shape[0]
    out = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            if a == b:
                continue
            rs = rho_s[a, b]
            if rs > 0.0:
                v = rs - rho_u[a, b]
            elif rs < 0.0:
                v = rho_u[a, b] - rs
            else:
                v = 0.0
            out[a, b] = v if v > 0.0 else 0.0
    return out


def delta_corr_matrix_np(rho_s, rho_u):
    out = np.maximum(np.sign(rho_s) * (rho_s - rho_u), 0.0)
    np.fill_diagonal(out, 0.0)
    return out


# ---------------------------------------------------------------- group max


@njit
def group_max_nb(delta, assignment, n_groups):
    out = np.zeros((n_groups, n_groups))
    d = delta.shape[0]
    for a in range(d):
        ga = assignment[a]
        for b in range(d):
            gb = assignment[b]
            if ga != gb and delta[a, b] > out[ga, gb]:
                out[ga, gb] = delta[a, b]
    return out


def group_max_np(delta, assignment, n_groups):
    out = np.zeros((n_groups, n_groups))
    masks = [assignment == g for g in range(n_groups)]
    for i in range(n_groups):
        rows = delta[masks[i]]
        for j in range(n_groups):
            if i != j:
                out[i, j] = max(rows[:, masks[j]].max(), 0.0)
    return out


# ---------------------------------------------------------------- hinge losses
# kind: 0 = devise (sum), 1 = sje (max violator), 2 = ale (rank-weighted)


@njit
def rank_hinge_nb(scores, y, margin, kind):
    n, c = scores.shape
    losses = np.zeros(n)
    grad = np.zeros((n, c))
    for k in range(n):
        t = y[k]
        st = scores[k, t]
        if kind == 1:
            best = -1
            best_v = 0.0
            for j in range(c):
                if j == t:
                    continue
                v = margin + scores[k, j] - st
                if best < 0 or v > best_v:
                    best = j
                    best_v = v
            if best >= 0 and best_v > 0.0:
                losses[k] = best_v
                grad[k, best] = 1.0
                grad[k, t] = -1.0
            continue
        total = 0.0
        r = 0
        for j in range(c):
            if j == t:
                continue
            v = margin + scores[k, j] - st
            if v > 0.0:
                total += v
                r += 1
        if r == 0:
            continue
        if kind == 0:
            wt = 1.0
        else:
            beta = 0.0
            for i in range(1, r + 1):
                beta += 1.0 / i
            wt = beta / r
        losses[k] = wt * total
        for j in range(c):
            if j != t and margin + scores[k, j] - st > 0.0:
                grad[k, j] = wt
        grad[k, t] = -wt * r
    return losses, grad


def rank_hinge_np(scores, y, margin, kind):
    n, c = scores.shape
    rows = np.arange(n)
    st = scores[rows, y]
    slack = margin + scores - st[:, None]
    slack[rows, y] = -np.inf
    grad = np.zeros((n, c))
    if kind == 1:
        best = np.argmax(slack, axis=1)
        best_v = slack[rows, best]
        hit = best_v > 0.0
        losses = np.where(hit, best_v, 0.0)
        grad[rows[hit], best[hit]] = 1.0
        grad[rows[hit], y[hit]] = -1.0
        return losses, grad
    viol = slack > 0.0
    r = viol.sum(axis=1)
    total = np.where(viol, slack, 0.0).sum(axis=1)
    if kind == 0:
        wt = np.where(r > 0, 1.0, 0.0)
    else:
        harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, c + 1))])
        wt = np.where(r > 0, harmonic[r] / np.maximum(r, 1), 0.0)
    losses = wt * total
    grad = viol * wt[:, None]
    grad[rows, y] = -wt * r
    return losses, grad


# ---------------------------------------------------------------- k-means


@njit
def nearest_center_nb(points, centers):
    n, d = points.shape
    k = centers.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n)
    for i in range(n):
        best = 0
        best_d = np.inf
        for j in range(k):
            s = 0.0
            for a in range(d):
                t = points[i, a] - centers[j, a]
                s += t * t
            if s < best_d:
                best_d = s
                best = j
        labels[i] = best
        dist[i] = best_d
    return labels, dist


def nearest_center_np(points, centers):
    diff = points[:, None, :] - centers[None, :, :]
    sq = np.einsum("nkd,nkd->nk", diff, diff)
    labels = np.argmin(sq, axis=1).astype(np.int64)
    return labels, sq[np.arange(len(points)), labels]


# ---------------------------------------------------------------- dispatch

if USE_NUMBA:
    weighted_phi = weighted_phi_nb
    delta_corr_matrix = delta_corr_matrix_nb
    group_max = group_max_nb
    rank_hinge = rank_hinge_nb
    nearest_center = nearest_center_nb
else:
    weighted_phi = weighted_phi_np
    delta_corr_matrix = delta_corr_matrix_np
    group_max = group_max_np
    rank_hinge = rank_hinge_np
    nearest_center = nearest_center_np
