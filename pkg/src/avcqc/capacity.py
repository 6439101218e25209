"""Minimax capacity ``C = max_P min_Q chi(P, rho_Q)`` of an AVCQC.

``Q`` ranges over conditional distributions ``Q(s|x)`` (the jammer sees the
channel input) and ``rho_Q(x) = sum_s Q(s|x) rho(x, s)``.  The objective is
concave in ``P`` and convex in ``Q``.

* The inner problem ``min_Q`` is solved by pairwise Frank-Wolfe over the
  product of simplices with an exact line search on the directional
  derivative.  The Frank-Wolfe gap certifies the inner value.
* The outer problem ``max_P`` uses the divergence vectors
  ``D(rho_Q(x) || sum_x' P(x') rho_Q(x'))`` as supergradients.  Every such
  vector ``c`` satisfies ``c . P' >= g(P')`` for *all* ``P'``, so the cuts
  collected along the way give a certified upper bound (a small linear
  program).  The next iterate is the cutting-plane maximiser by default, or a
  projected supergradient step with the ``1/sqrt(k)`` schedule.
* The swapped problem ``min_Q max_P`` is solved independently by cutting
  planes over ``Q`` with a Blahut-Arimoto inner capacity computation, which
  yields the duality-gap estimate.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linprog
from sklearn.base import BaseEstimator

from .channels import double_bar
from .exceptions import NonConvergence
from .info import holevo_chi
from .validation import check_channel, check_distribution

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
LOG_FLOOR = 1e-100
# weight of the maximally mixed state blended into cut reference states
CUT_BLEND = 1e-12
# cutting-plane iterations before Blahut-Arimoto takes over in cq_capacity
MAX_CUTS = 100


# -- inner problem -----------------------------------------------------------------


class _JammerObjective:
    """``Q -> chi(P, rho_Q)`` with gradients, for a fixed input distribution."""

    def __init__(self, states, P):
        self.states = states
        self.P = np.asarray(P, dtype=float)
        self.active = self.P > 0
        self.nx, self.ns, self.d = states.shape[0], states.shape[1], states.shape[2]

    def mixtures(self, Q):
        rho = np.einsum("xs,xsij->xij", Q, self.states)
        avg = np.einsum("x,xij->ij", self.P, rho)
        return rho, avg

    def value(self, Q):
        rho, avg = self.mixtures(Q)
        w = np.linalg.eigvalsh(np.concatenate([rho, avg[None]]))
        w = np.clip(w, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -np.sum(np.where(w > 0, w * np.log2(w), 0.0), axis=1)
        return float(ent[-1] - self.P @ ent[:-1])

    def gradient(self, Q):
        """``dchi/dQ(s|x) = P(x) tr[rho(x,s) (log rho_Q(x) - log avg)]``.

        Row-constant terms are dropped.  Eigenvalues of ``rho_Q(x)`` are
        floored at ``f`` and those of the average at ``P(x) f``, which
        reproduces the finite one-sided derivative when a state outside the
        joint support enters.
        """
        rho, avg = self.mixtures(Q)
        w, v = np.linalg.eigh(np.concatenate([rho, avg[None]]))
        wa, va = w[-1], v[-1]
        G = np.zeros((self.nx, self.ns))
        for x in np.flatnonzero(self.active):
            lx = (v[x] * np.log2(np.maximum(w[x], LOG_FLOOR))) @ v[x].conj().T
            la = (va * np.log2(np.maximum(wa, self.P[x] * LOG_FLOOR))) @ va.conj().T
            G[x] = self.P[x] * np.real(np.einsum("sij,ji->s", self.states[x], lx - la))
        return G


@dataclass
class InnerResult:
    Q: np.ndarray
    value: float
    gap: float
    iterations: int
    converged: bool
    nonunique: bool = False

    @property
    def lower_bound(self):
        return self.value - max(self.gap, 0.0)


def _line_search(obj, Q, D, slope0):
    def slope(g):
        return float(np.sum(obj.gradient(Q + g * D) * D))

    if slope0 >= 0:
        return 0.0
    s1 = slope(1.0)
    if s1 <= 0:
        return 1.0
    return brentq(slope, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def _frank_wolfe(obj, Q0, tol, max_iter):
    """Pairwise Frank-Wolfe, one row at a time.

    Each iteration moves mass within the row with the largest Frank-Wolfe
    gap, from its worst active state to its best state, with an exact line
    search.  Rows need very different step sizes when ``P`` is uneven, which
    a joint step over all rows cannot provide.  Stops when the total
    Frank-Wolfe gap is ``<= tol / 2``.
    """
    Q = np.array(Q0, dtype=float)
    rows = np.arange(obj.nx)
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        G = obj.gradient(Q)
        v = np.argmin(G, axis=1)
        row_gaps = np.sum(G * Q, axis=1) - G[rows, v]
        gap = float(row_gaps.sum())
        if gap <= tol / 2:
            return Q, gap, it, True
        x = int(np.argmax(row_gaps))
        a = int(np.argmax(np.where(Q[x] > 0, G[x], -np.inf)))
        D = np.zeros_like(Q)
        D[x, v[x]] += Q[x, a]
        D[x, a] -= Q[x, a]
        gamma = _line_search(obj, Q, D, float(np.sum(G * D)))
        Q = Q + gamma * D
        Q[np.abs(Q) < 1e-15] = 0.0
        Q = np.clip(Q, 0.0, None)
        Q /= Q.sum(axis=1, keepdims=True)
    return Q, gap, it, False


def _uniform_Q(nx, ns):
    return np.full((nx, ns), 1.0 / ns)


def _random_Q(nx, ns, rng):
    return rng.dirichlet(np.ones(ns), size=nx)


def _tv(Q1, Q2):
    return 0.5 * float(np.max(np.sum(np.abs(Q1 - Q2), axis=1)))


def inner_minimize(W, P, tol=DEFAULT_TOL, Q0=None, max_iter=10_000, probes=0,
                   seed=None, raise_on_failure=True):
    """Minimise ``chi(P, rho_Q)`` over jammer strategies ``Q``.

    Parameters
    ----------
    W : AVCQC
    P : array-like
        Input distribution.
    tol : float
        Target accuracy in bits; Frank-Wolfe stops once its gap is ``tol/2``.
    Q0 : array-like, optional
        Warm start (uniform rows by default).
    probes : int
        Extra runs from random starting points.  When a probe reaches a value
        within ``tol`` of the best but with a strategy more than ``1e-3`` away
        in total variation, the minimiser is flagged as non-unique.  The
        first-found minimiser is returned on ties.

    Returns
    -------
    InnerResult
    """
    W = check_channel(W)
    P = check_distribution(P, W.n_inputs)
    if W.n_states == 1:
        Q = np.ones((W.n_inputs, 1))
        return InnerResult(Q, holevo_chi(P, W.states[:, 0]).value, 0.0, 0, True)
    obj = _JammerObjective(W.states, P)
    start = _uniform_Q(W.n_inputs, W.n_states) if Q0 is None else np.asarray(Q0, float)
    Q, gap, it, ok = _frank_wolfe(obj, start, tol, max_iter)
    best = InnerResult(Q, obj.value(Q), gap, it, ok)
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        Qp, gp, itp, okp = _frank_wolfe(obj, _random_Q(W.n_inputs, W.n_states, rng), tol, max_iter)
        vp = obj.value(Qp)
        if abs(vp - best.value) < tol and _tv(Qp, best.Q) > 1e-3:
            best.nonunique = True
        if vp < best.value - tol:
            best = InnerResult(Qp, vp, gp, itp, okp, best.nonunique)
    if not best.converged and raise_on_failure:
        raise NonConvergence(f"inner minimisation did not reach gap {tol / 2:g} "
                             f"in {max_iter} iterations", best_value=best.value,
                             gap=best.gap, iterations=max_iter)
    return best


def inner_min(W, P, tol=DEFAULT_TOL, **kwargs):
    """Worst-case jammer strategy at input distribution ``P``.

    Returns ``(Q, value)`` with ``value = min_Q chi(P, rho_Q)`` up to ``tol``.
    """
    res = inner_minimize(W, P, tol=tol, **kwargs)
    return res.Q, res.value


# -- outer problem -------------------------------------------------------------------


def _divergences_to(states_x, sigma):
    """``D(rho_x || sigma)`` for a stack of states and a full-rank ``sigma``."""
    w, v = np.linalg.eigh(sigma)
    log_sigma = (v * np.log2(np.maximum(w, LOG_FLOOR))) @ v.conj().T
    wr = np.clip(np.linalg.eigvalsh(states_x), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        neg_ent = np.sum(np.where(wr > 0, wr * np.log2(wr), 0.0), axis=1)
    cross = np.real(np.einsum("xij,ji->x", states_x, log_sigma))
    return neg_ent - cross


def _cut(states, P, Q):
    """Supergradient cut: ``c . P' >= chi(P', rho_Q) >= g(P')`` for every ``P'``."""
    rho = np.einsum("xs,xsij->xij", Q, states)
    d = rho.shape[1]
    sigma = np.einsum("x,xij->ij", P, rho)
    sigma = (1 - CUT_BLEND) * sigma + CUT_BLEND * np.eye(d) / d
    return _divergences_to(rho, sigma)


def _project_simplex(y):
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, y.size + 1)
    r = np.nonzero(u * k > css - 1)[0][-1]
    theta = (css[r] - 1) / (r + 1.0)
    return np.maximum(y - theta, 0.0)


def _cut_lp(cuts):
    """``max_P min_k c_k . P`` over the simplex; returns value, argmax, cut weights."""
    C = np.asarray(cuts)
    k, m = C.shape
    c_obj = np.zeros(m + 1)
    c_obj[-1] = -1.0
    A_ub = np.hstack([-C, np.ones((k, 1))])
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    res = linprog(c_obj, A_ub=A_ub, b_ub=np.zeros(k), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    if res.status != 0:
        raise NonConvergence(f"cutting-plane LP failed: {res.message}")
    P = np.clip(res.x[:m], 0.0, None)
    weights = np.clip(-res.ineqlin.marginals, 0.0, None)
    return float(-res.fun), P / P.sum(), weights


@dataclass
class CapacityResult:
    """Minimax capacity with optimiser certificates.

    ``value`` is the inner minimum at ``P_star``; ``lower_bound`` and
    ``upper_bound`` bracket ``max_P min_Q chi`` and ``duality_gap`` is the
    swapped-problem upper bound minus ``lower_bound``.
    """

    value: float
    P_star: np.ndarray
    Q_star: np.ndarray
    duality_gap: float
    iterations: int
    converged: bool
    lower_bound: float
    upper_bound: float
    tol: float
    method: str = "cutting-plane"
    seed: int = 0
    minmax_value: float = float("nan")
    nonunique_inner: bool = False
    history: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "value": self.value,
            "P_star": [float(p) for p in self.P_star],
            "Q_star": [[float(q) for q in row] for row in self.Q_star],
            "duality_gap": self.duality_gap,
            "minmax_value": self.minmax_value,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "iterations": self.iterations,
            "converged": self.converged,
            "nonunique_inner": self.nonunique_inner,
            "tolerance": self.tol,
            "method": self.method,
            "seed": self.seed,
        }


def maximize_inner(W, tol=DEFAULT_TOL, method="cutting-plane", max_iter=5_000,
                   step=1.0, P0=None, seed=0, raise_on_failure=True):
    """Solve ``max_P min_Q chi(P, rho_Q)`` without the swapped problem.

    ``method`` is ``"cutting-plane"`` (default) or ``"supergradient"``
    (projected ascent with step ``step / sqrt(k)`` and iterate averaging).
    Iteration stops when the certified bracket is narrower than ``tol``.
    """
    W = check_channel(W)
    nx, ns = W.n_inputs, W.n_states
    inner_tol = tol / 2
    P = np.full(nx, 1.0 / nx) if P0 is None else check_distribution(P0, nx).copy()
    Q = _uniform_Q(nx, ns)
    cuts, Qs = [], []
    best = None
    lb = -np.inf
    ub = np.inf
    history = []
    avg_P = np.zeros(nx)
    nonunique = False
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        res = inner_minimize(W, P, tol=inner_tol, Q0=Q, raise_on_failure=False)
        Q = res.Q
        nonunique = nonunique or res.nonunique
        if best is None or res.lower_bound > lb:
            lb = res.lower_bound
            best = (P.copy(), res)
        c = _cut(W.states, P, Q)
        cuts.append(c)
        Qs.append(Q.copy())
        ub_k, P_lp, _ = _cut_lp(cuts)
        ub = min(ub, ub_k)
        history.append((lb, ub))
        if ub - lb <= tol:
            converged = True
            break
        if method == "cutting-plane":
            P = P_lp
        elif method == "supergradient":
            s = c - c @ P
            P = _project_simplex(P + step / np.sqrt(k) * s)
            avg_P += P
            if k % 10 == 0:
                # evaluate the running average as a candidate incumbent
                Pa = avg_P / k
                ra = inner_minimize(W, Pa, tol=inner_tol, Q0=Q, raise_on_failure=False)
                if ra.lower_bound > lb:
                    lb = ra.lower_bound
                    best = (Pa.copy(), ra)
                cuts.append(_cut(W.states, Pa, ra.Q))
                Qs.append(ra.Q.copy())
        else:
            raise ValueError(f"unknown method {method!r}")
    P_best, res_best = best
    out = CapacityResult(
        value=res_best.value, P_star=P_best, Q_star=res_best.Q,
        duality_gap=float("nan"), iterations=k, converged=converged,
        lower_bound=lb, upper_bound=ub, tol=tol, method=method, seed=seed,
        nonunique_inner=nonunique, history=history)
    if not converged and raise_on_failure:
        raise NonConvergence(f"outer solver bracket {ub - lb:.3g} above tol {tol:g}",
                             best_value=out.value, lower_bound=lb, upper_bound=ub)
    _, _, weights = _cut_lp(cuts)
    out.mixed_jammer = np.einsum("k,kxs->xs", weights / weights.sum(), np.asarray(Qs))
    return out


# -- swapped problem -----------------------------------------------------------------


def _chi_divergences(states, P):
    d = states.shape[1]
    sigma = np.einsum("x,xij->ij", P, states)
    sigma = (1 - CUT_BLEND) * sigma + CUT_BLEND * np.eye(d) / d
    return _divergences_to(states, sigma)


def _ba_polish(states, P, tol, max_iter):
    P = np.maximum(P, 1e-12)
    P /= P.sum()
    lower = upper = 0.0
    for _ in range(max_iter):
        D = _chi_divergences(states, P)
        lower, upper = float(P @ D), float(D.max())
        if upper - lower <= tol:
            break
        P = P * np.exp2(D - D.max())
        P /= P.sum()
    return P, lower, upper


def cq_capacity(states, tol=1e-9, P0=None, method="cutting-plane", max_iter=200_000,
                max_cuts=MAX_CUTS):
    """Holevo capacity ``max_P chi(P, V)`` of a cq channel.

    ``method`` is ``"cutting-plane"`` (divergence-vector cuts, fast for small
    alphabets) or ``"blahut-arimoto"``.  Cutting planes stop after
    ``max_cuts`` cuts and Blahut-Arimoto iterations finish from the best
    point, since Kelley's method stalls when the optimum is on the boundary
    of the simplex.  Returns ``(P, lower, upper)`` where ``lower`` is ``chi``
    at the returned ``P`` and ``upper`` a certified upper bound on the
    capacity.
    """
    states = np.asarray(states)
    nx = states.shape[0]
    P = np.full(nx, 1.0 / nx) if P0 is None else np.asarray(P0, float)
    if method == "blahut-arimoto":
        return _ba_polish(states, P, tol, max_iter)
    if method != "cutting-plane":
        raise ValueError(f"unknown method {method!r}")
    cuts = []
    best_P, lower, upper = P, -np.inf, np.inf
    for _ in range(max_cuts):
        D = _chi_divergences(states, P)
        if float(P @ D) > lower:
            best_P, lower = P, float(P @ D)
        # max_x D_x is itself an upper bound (the golden formula)
        upper = min(upper, float(D.max()))
        cuts.append(D)
        if upper - lower <= tol:
            return best_P, lower, upper
        ub, P, _ = _cut_lp(cuts)
        upper = min(upper, ub)
        if upper - lower <= tol:
            return best_P, lower, upper
    P_ba, lo_ba, up_ba = _ba_polish(states, best_P, tol, max_iter)
    if lo_ba > lower:
        best_P, lower = P_ba, lo_ba
    return best_P, lower, min(upper, up_ba)


def _jammer_cut(W, P, Q):
    obj = _JammerObjective(W.states, P)
    return obj.value(Q), obj.gradient(Q)


def minimize_capacity(W, tol=DEFAULT_TOL, Q0=None, max_iter=5_000, raise_on_failure=True):
    """Solve the swapped problem ``min_Q max_P chi(P, rho_Q)`` by cutting planes.

    Returns ``(value, Q, lower, upper, iterations)``; ``value`` is the best
    certified upper bound found.
    """
    W = check_channel(W)
    nx, ns = W.n_inputs, W.n_states
    m = nx * ns
    Q = _uniform_Q(nx, ns) if Q0 is None else np.asarray(Q0, float)
    A_rows, b_rows = [], []
    A_eq = np.zeros((nx, m + 1))
    for x in range(nx):
        A_eq[x, x * ns:(x + 1) * ns] = 1.0
    best_ub, best_Q = np.inf, Q
    lb = -np.inf
    P = None
    k = 0
    for k in range(1, max_iter + 1):
        P, low, up = cq_capacity(double_bar(W, Q).states, tol=tol / 4, P0=P)
        if up < best_ub:
            best_ub, best_Q = up, Q.copy()
        val, G = _jammer_cut(W, P, Q)
        # t >= val + G . (Q' - Q)   <=>   G . Q' - t <= G . Q - val
        A_rows.append(np.concatenate([G.ravel(), [-1.0]]))
        b_rows.append(float(G.ravel() @ Q.ravel() - val))
        c_obj = np.zeros(m + 1)
        c_obj[-1] = 1.0
        res = linprog(c_obj, A_ub=np.asarray(A_rows), b_ub=np.asarray(b_rows),
                      A_eq=A_eq, b_eq=np.ones(nx),
                      bounds=[(0, None)] * m + [(None, None)], method="highs")
        if res.status != 0:
            raise NonConvergence(f"swapped cutting-plane LP failed: {res.message}")
        lb = max(lb, float(res.fun))
        if best_ub - lb <= tol:
            return best_ub, best_Q, lb, best_ub, k
        Q = np.clip(res.x[:m].reshape(nx, ns), 0.0, None)
        Q /= Q.sum(axis=1, keepdims=True)
    if raise_on_failure:
        raise NonConvergence(f"swapped problem bracket {best_ub - lb:.3g} above tol {tol:g}",
                             best_value=best_ub, lower_bound=lb)
    return best_ub, best_Q, lb, best_ub, k


# -- public entry points -----------------------------------------------------------


def _degenerate(W, tol, seed):
    nx, ns = W.n_inputs, W.n_states
    return CapacityResult(value=0.0, P_star=np.ones(1), Q_star=_uniform_Q(nx, ns),
                          duality_gap=0.0, iterations=0, converged=True,
                          lower_bound=0.0, upper_bound=0.0, tol=tol, seed=seed,
                          minmax_value=0.0)


def solve(W, tol=DEFAULT_TOL, seed=0, method="cutting-plane", swapped=True, **kwargs):
    """Capacity ``max_P min_Q chi(P, rho_Q)`` with a duality-gap certificate.

    Returns
    -------
    CapacityResult
    """
    W = check_channel(W)
    if W.n_inputs == 1:
        return _degenerate(W, tol, seed)
    out = maximize_inner(W, tol=tol, method=method, seed=seed, **kwargs)
    if swapped:
        if W.n_states == 1:
            out.minmax_value = out.upper_bound
        else:
            out.minmax_value = minimize_capacity(W, tol=tol, Q0=out.mixed_jammer)[0]
        out.duality_gap = max(out.minmax_value - out.lower_bound, 0.0)
    return out


def minimax_gap(W, tol=DEFAULT_TOL, seed=0):
    """``|max_P min_Q chi - min_Q max_P chi|`` from two independent solves."""
    W = check_channel(W)
    if W.n_states == 1 or W.n_inputs == 1:
        return 0.0
    maxmin = maximize_inner(W, tol=tol, seed=seed).value
    minmax = minimize_capacity(W, tol=tol)[0]
    return abs(minmax - maxmin)


class MinimaxCapacity(BaseEstimator):
    """Estimator wrapper around :func:`solve`.

    Parameters
    ----------
    tol : float
        Bracket width in bits.
    method : {"cutting-plane", "supergradient"}
    swapped : bool
        Also solve ``min_Q max_P`` to estimate the duality gap.
    seed : int

    Attributes
    ----------
    capacity_ : float
    input_distribution_ : ndarray
    jammer_ : ndarray
        Worst-case ``Q(s|x)`` at ``input_distribution_``.
    duality_gap_ : float
    result_ : CapacityResult
    """

    def __init__(self, tol=DEFAULT_TOL, method="cutting-plane", swapped=True, seed=0):
        self.tol = tol
        self.method = method
        self.swapped = swapped
        self.seed = seed

    def fit(self, W, y=None):
        self.result_ = solve(W, tol=self.tol, seed=self.seed, method=self.method,
                             swapped=self.swapped)
        self.capacity_ = self.result_.value
        self.input_distribution_ = self.result_.P_star
        self.jammer_ = self.result_.Q_star
        self.duality_gap_ = self.result_.duality_gap
        self.n_iter_ = self.result_.iterations
        return self

    def score(self, W, y=None):
        """Worst-case Holevo quantity of the fitted input distribution on ``W``."""
        return inner_min(check_channel(W), self.input_distribution_, tol=self.tol)[1]
