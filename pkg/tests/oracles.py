"""Independent classical reference computations.

Nothing here imports the package's solvers: mutual information is computed
from transition matrices directly and the capacity oracle is a grid search
over jammer strategies wrapped around a plain Blahut-Arimoto loop.
"""

import itertools

import numpy as np


def mutual_information(P, T):
    """``I(P; T)`` in bits for a row-stochastic ``T[x, y]``."""
    P = np.asarray(P, float)
    T = np.asarray(T, float)
    q = P @ T
    total = 0.0
    for x in range(T.shape[0]):
        for y in range(T.shape[1]):
            if P[x] > 0 and T[x, y] > 0:
                total += P[x] * T[x, y] * np.log2(T[x, y] / q[y])
    return total


def blahut_arimoto(T, iters=3000):
    """Capacities of a batch of channels ``T[b, x, y]`` (vectorised)."""
    T = np.asarray(T, float)
    if T.ndim == 2:
        T = T[None]
    B, X, _ = T.shape
    P = np.full((B, X), 1.0 / X)
    logT = np.where(T > 0, np.log(np.where(T > 0, T, 1.0)), 0.0)
    for _ in range(iters):
        q = np.einsum("bx,bxy->by", P, T)
        logq = np.log(np.where(q > 0, q, 1.0))
        D = np.sum(T * (logT - logq[:, None, :]), axis=2)
        P = P * np.exp(D)
        P /= P.sum(axis=1, keepdims=True)
    q = np.einsum("bx,bxy->by", P, T)
    logq = np.log(np.where(q > 0, q, 1.0))
    D = np.sum(T * (logT - logq[:, None, :]), axis=2)
    # upper bound max_x D(x) and lower bound sum_x P(x) D(x): report the lower one
    return np.sum(P * D, axis=1) / np.log(2), np.max(D, axis=1) / np.log(2)


def _jammer_grid(n_inputs, n_states, step, centre=None, radius=None):
    """Rows ``Q(.|x)`` on a simplex grid, optionally restricted around ``centre``."""
    m = int(round(1 / step))
    pts = [np.array(c, float) / m for c in itertools.product(range(m + 1), repeat=n_states)
           if sum(c) == m]
    pts = np.array(pts)
    rows = []
    for x in range(n_inputs):
        if centre is None:
            rows.append(pts)
        else:
            keep = np.max(np.abs(pts - centre[x]), axis=1) <= radius + 1e-12
            rows.append(pts[keep])
    return rows


def avc_capacity_oracle(matrices, step=1 / 64, rounds=2, coarse=1 / 8, iters=1500):
    """``min_Q C(T_Q)`` for a classical AVC given as a list of ``T_s``.

    A coarse grid over all jammer strategies is refined ``rounds`` times
    around the best point, ending at resolution ``step``.  Returns the value
    and the minimising jammer.
    """
    T = np.stack([np.asarray(m, float) for m in matrices])  # (S, X, Y)
    S, X, _ = T.shape
    steps = list(np.geomspace(coarse, step, rounds + 1))
    centre, best = None, np.inf
    for r, h in enumerate(steps):
        radius = None if r == 0 else 2 * steps[r - 1]
        rows = _jammer_grid(X, S, h, centre, radius)
        combos = np.array(list(itertools.product(*[range(len(rw)) for rw in rows])))
        for chunk in np.array_split(combos, max(1, len(combos) // 4000)):
            Q = np.stack([rows[x][chunk[:, x]] for x in range(X)], axis=1)  # (B, X, S)
            TQ = np.einsum("bxs,sxy->bxy", Q, T)
            low, _ = blahut_arimoto(TQ, iters=iters)
            k = int(np.argmin(low))
            if low[k] < best:
                best, centre = float(low[k]), Q[k]
    return best, centre
