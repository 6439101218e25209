"""Exact and Monte Carlo evaluation of the four error criteria.

``criterion`` is ``"avg"`` or ``"max"`` over messages and ``scenario`` the
jammer's side information (1: word only, 2: word and message).  This gives
``p_a``, ``p_m``, ``p_a**`` and ``p_m**``.  Error values are exact traces, so
Monte Carlo randomness enters only through the sampled key and message.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .adversary import EXHAUSTIVE_BUDGET, _slice_traces, best_state
from .channels import product_traces
from .exceptions import BudgetExceeded, ValidationError
from .operators import dim_cap

CRITERIA = ("avg", "max")


def _check_budget(code):
    W, n = code.W, code.n
    if W.n_states ** n > EXHAUSTIVE_BUDGET:
        raise BudgetExceeded(f"|S|^n = {W.n_states}^{n} exceeds the exhaustive jammer budget; "
                             "use monte_carlo", budget=EXHAUSTIVE_BUDGET)
    if W.dim ** n > dim_cap():
        raise BudgetExceeded(f"d^n = {W.dim}^{n} exceeds the dimension cap; use monte_carlo",
                             budget=dim_cap())


def _check_args(criterion, scenario):
    if criterion not in CRITERIA:
        raise ValidationError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    if scenario not in (1, 2):
        raise ValidationError(f"scenario must be 1 or 2, got {scenario}")


def _worst_loss(W, x, count, D):
    # max_s sum over the pooled pairs of tr[rho(x, s) (I - D)]
    return count - float(np.min(product_traces(W, x, D)))


def _max_criterion_by_keys(code):
    """Maximum-error criterion from per-key misdecoding operators, message by message."""
    W = code.W
    miss = {}
    for k in range(code.K):
        povm = code.decoder(k)
        for j in range(code.J):
            D = np.asarray(povm.elements[j])
            comp = (1.0 - D) if D.ndim == 1 else (np.eye(D.shape[0]) - D)
            key = (j, code.word(j, k))
            miss[key] = miss.get(key, 0) + comp
    per_msg = np.zeros(code.J)
    for (j, x), M in sorted(miss.items()):
        per_msg[j] += float(np.max(product_traces(W, x, M)))
    return float(per_msg.max() / code.K)


def error_probability(code, criterion="avg", scenario=1):
    """Exact error of ``code`` under an exhaustive jammer.

    Raises
    ------
    BudgetExceeded
        When ``|S|^n`` or ``d^n`` is beyond the exact budgets.
    """
    _check_args(criterion, scenario)
    _check_budget(code)
    W = code.W
    by_word, by_pair = code.pooled()
    if criterion == "avg" and scenario == 1:
        total = sum(_worst_loss(W, x, c, D) for x, (c, D) in sorted(by_word.items()))
        return total / (code.J * code.K)
    if criterion == "avg":
        total = sum(_worst_loss(W, x, c, D) for (x, _), (c, D) in sorted(by_pair.items()))
        return total / (code.J * code.K)
    if scenario == 2:
        per_msg = np.zeros(code.J)
        for (x, j), (c, D) in sorted(by_pair.items()):
            per_msg[j] += _worst_loss(W, x, c, D)
        return float(per_msg.max() / code.K)
    return _max_criterion_by_keys(code)


@dataclass
class ErrorReport:
    """All four criteria for one code."""

    p_a: float
    p_m: float
    p_a_star2: float
    p_m_star2: float
    mode: str = "exact"
    trials: int = None
    seed: int = None
    half_width: dict = field(default_factory=dict)
    budgets: dict = field(default_factory=dict)

    def ordering(self, tol=1e-12):
        """The order relations between the criteria, each as a bool."""
        return {
            "p_a<=p_m": self.p_a <= self.p_m + tol,
            "p_a<=p_a**": self.p_a <= self.p_a_star2 + tol,
            "p_a**<=p_m**": self.p_a_star2 <= self.p_m_star2 + tol,
            "p_m==p_m**": abs(self.p_m - self.p_m_star2) <= tol,
        }

    def to_dict(self):
        out = asdict(self)
        out["version"] = __version__
        return out


def evaluate(code, mode="exact", trials=1000, seed=0):
    """Evaluate ``p_a``, ``p_m``, ``p_a**`` and ``p_m**`` in one report."""
    budgets = {"exhaustive_jammer": EXHAUSTIVE_BUDGET, "dim_cap": dim_cap()}
    if mode == "exact":
        vals = {f"{c}{s}": error_probability(code, c, s) for c in CRITERIA for s in (1, 2)}
        return ErrorReport(vals["avg1"], vals["max1"], vals["avg2"], vals["max2"],
                           budgets=budgets)
    if mode != "monte_carlo":
        raise ValidationError(f"unknown mode {mode!r}")
    est, hw = {}, {}
    for c, s in ((c, s) for c in CRITERIA for s in (1, 2)):
        est[f"{c}{s}"], hw[f"{c}{s}"] = monte_carlo(code, c, s, trials, seed)
    return ErrorReport(est["avg1"], est["max1"], est["avg2"], est["max2"], mode="monte_carlo",
                       trials=trials, seed=seed, budgets=budgets,
                       half_width={"p_a": hw["avg1"], "p_m": hw["max1"],
                                   "p_a_star2": hw["avg2"], "p_m_star2": hw["max2"]})


def _sample_errors(code, keys, msgs, scenario, seed):
    W = code.W
    povms, reply = {}, {}
    out = np.empty(len(keys))
    for t, (k, j) in enumerate(zip(keys, msgs)):
        x = code.word(j, k)
        target = (x, j) if scenario == 2 else x
        if target not in reply:
            reply[target] = best_state(code, x, scenario, j if scenario == 2 else None, seed=seed)[0]
        if k not in povms:
            povms[k] = code.decoder(k)
        D = povms[k].elements[j]
        out[t] = 1.0 - float(_slice_traces(W, x, D, reply[target], free=-1))
    return out


def _mean_hw(samples):
    if samples.size < 2:
        return float(samples.mean()), 0.0
    return float(samples.mean()), 1.96 * float(samples.std(ddof=1)) / math.sqrt(samples.size)


def monte_carlo(code, criterion="avg", scenario=1, trials=1000, seed=0):
    """Sampled estimate and 95% half-width ``1.96 std / sqrt(trials)``.

    Keys (and messages for the average criterion) are drawn uniformly; the
    jammer answers each sampled word with its best state sequence.  For the
    maximum criterion every message gets ``trials`` sampled keys and the
    largest per-message estimate is returned with its own half-width.  With
    the message fixed, a jammer that sees the word already knows the message,
    so both scenarios use the per-message best response there.
    """
    _check_args(criterion, scenario)
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    if criterion == "avg":
        keys = rng.integers(0, code.K, size=trials)
        msgs = rng.integers(0, code.J, size=trials)
        return _mean_hw(_sample_errors(code, keys, msgs, scenario, seed))
    best = (-1.0, 0.0)
    for j in range(code.J):
        keys = rng.integers(0, code.K, size=trials)
        est = _mean_hw(_sample_errors(code, keys, np.full(trials, j), 2, seed))
        if est[0] > best[0]:
            best = est
    return best
