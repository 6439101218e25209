"""Worst-case jammer search against a random correlated code.

The jammer sees the code and the transmitted word (scenario 1) or the word
and the message (scenario 2), never the key.  Its conditional error for a
state sequence ``s`` is

* scenario 1: ``1 - tr[rho(x, s) Dbar_x] / N_x``,
* scenario 2: ``1 - tr[rho(x, s) Dbar_{x,j}] / N_{x,j}``,

where ``Dbar`` sums the decoding elements over all (key, message) pairs that
send ``x`` (and, in scenario 2, carry message ``j``).
"""

from dataclasses import dataclass

import numpy as np

from .channels import product_traces
from .exceptions import AlphabetMismatch, ValidationError, WordNotInCode

EXHAUSTIVE_BUDGET = 10 ** 6
RESTARTS = 8


@dataclass
class JammerPolicy:
    """Deterministic or mixed jammer over the words of one code.

    ``mapping`` sends a word (scenario 1) or a ``(word, message)`` pair
    (scenario 2) to a state sequence, or to a distribution of shape
    ``(n_states,) * n`` when ``kind == "mixed"``.
    """

    scenario: int
    kind: str
    mapping: dict

    def __post_init__(self):
        if self.kind not in ("deterministic", "mixed"):
            raise ValidationError(f"unknown policy kind {self.kind!r}")
        if self.kind == "mixed":
            for key, q in self.mapping.items():
                q = np.asarray(q, dtype=float)
                if np.any(q < -1e-12) or abs(q.sum() - 1) > 1e-9:
                    raise ValidationError(f"mixed row for {key} is not a distribution")


def _target(code, x_seq, scenario, j):
    by_word, by_pair = code.pooled()
    x_seq = tuple(int(a) for a in x_seq)
    if scenario == 1:
        if x_seq not in by_word:
            raise WordNotInCode(f"{x_seq} is not a codeword", word=list(x_seq))
        return by_word[x_seq]
    if scenario != 2:
        raise ValidationError(f"scenario must be 1 or 2, got {scenario}")
    if j is None:
        raise ValidationError("scenario 2 needs the message j")
    if (x_seq, int(j)) not in by_pair:
        raise WordNotInCode(f"{x_seq} never carries message {j}", word=list(x_seq), message=int(j))
    return by_pair[(x_seq, int(j))]


def success_traces(code, x_seq, scenario=1, j=None):
    """``tr[rho(x, s) Dbar] / N`` for every state sequence; shape ``(n_states,) * n``."""
    count, D = _target(code, x_seq, scenario, j)
    return product_traces(code.W, x_seq, D) / count


def _slice_traces(W, x_seq, op, s_seq, free):
    """Traces with every position but ``free`` fixed to ``s_seq``; shape ``(n_states,)``."""
    n, d = len(x_seq), W.dim
    op = np.asarray(op)
    if op.ndim == 1 or W.is_classical:
        diag = op if op.ndim == 1 else np.diagonal(op)
        t = np.real(diag).reshape((d,) * n)
        diags = W.diagonals()
        for i, x in enumerate(x_seq):
            r = diags[x] if i == free else diags[x, s_seq[i]]
            t = np.tensordot(t, r, axes=([0], [-1]))
        return np.asarray(t, dtype=float)
    t = op.reshape((d,) * (2 * n))
    m = n
    for i, x in enumerate(x_seq):
        if i == free:
            t = np.tensordot(t, W.states[x], axes=([0, m], [2, 1]))
        else:
            t = np.tensordot(t, W.states[x, s_seq[i]], axes=([0, m], [1, 0]))
        m -= 1
    return np.real(t)


def _greedy(W, x_seq, op, restarts, rng):
    n, ns = len(x_seq), W.n_states
    best_s, best_v = None, np.inf
    for r in range(restarts):
        s = np.zeros(n, dtype=int) if r == 0 else rng.integers(0, ns, size=n)
        current = np.inf
        while True:
            changed = False
            for i in range(n):
                vals = _slice_traces(W, x_seq, op, s, i)
                k = int(np.argmin(vals))
                if vals[k] < vals[s[i]] - 1e-15:
                    s[i] = k
                    changed = True
                current = float(vals[s[i]])
            if not changed:
                break
        if current < best_v - 1e-15:
            best_s, best_v = s.copy(), current
    return tuple(int(a) for a in best_s), best_v


def best_state(code, x_seq, scenario=1, j=None, mode="auto", restarts=RESTARTS, seed=0,
               budget=EXHAUSTIVE_BUDGET):
    """State sequence maximising the conditional error of ``x_seq``.

    Parameters
    ----------
    mode : {"auto", "exhaustive", "greedy"}
        ``auto`` is exhaustive when ``|S|^n <= budget``.  Greedy runs
        left-to-right coordinate sweeps from the all-zero sequence and
        ``restarts - 1`` random starts.

    Returns
    -------
    (s_seq, value)
        Ties go to the lexicographically lowest sequence in exhaustive mode.
    """
    count, D = _target(code, x_seq, scenario, j)
    x_seq = tuple(int(a) for a in x_seq)
    W = code.W
    if mode == "auto":
        mode = "exhaustive" if W.n_states ** len(x_seq) <= budget else "greedy"
    if mode == "exhaustive":
        vals = product_traces(W, x_seq, D)
        k = int(np.argmin(vals))
        s = tuple(int(a) for a in np.unravel_index(k, vals.shape))
        return s, float(1.0 - vals.flat[k] / count)
    if mode != "greedy":
        raise ValidationError(f"unknown search mode {mode!r}")
    rng = np.random.default_rng([int(seed), 0 if j is None else int(j) + 1, *x_seq])
    s, v = _greedy(W, x_seq, D, restarts, rng)
    return s, float(1.0 - v / count)


def product_strategy(Q, x_seq):
    """Distribution on ``S^n`` induced by the per-symbol strategy ``Q(s|x)``."""
    Q = np.asarray(Q, dtype=float)
    out = np.ones(())
    for x in x_seq:
        out = np.multiply.outer(out, Q[int(x)])
    return out


def mixed_value(code, Q_n, scenario=1, word=None, j=None):
    """Error under a mixed jammer.

    ``Q_n`` maps words (or ``(word, message)`` pairs in scenario 2) to
    distributions over ``S^n``; a callable or a per-symbol matrix ``Q(s|x)``
    is also accepted.  With ``word`` given, returns that word's conditional
    error; otherwise the message- and key-averaged error, directly comparable
    with the average criterion.
    """
    by_word, by_pair = code.pooled()
    ns, n = code.W.n_states, code.n

    def row(key):
        if callable(Q_n):
            q = Q_n(key)
        elif isinstance(Q_n, dict):
            q = Q_n[key]
        else:
            q = product_strategy(Q_n, key[0] if scenario == 2 else key)
        q = np.asarray(q, dtype=float).reshape((ns,) * n)
        if np.any(q < -1e-12) or abs(q.sum() - 1) > 1e-9:
            raise AlphabetMismatch(f"mixed row for {key} is not a distribution on S^n")
        return q

    def conditional(key):
        x, jj = (key if scenario == 2 else (key, None))
        return 1.0 - float(np.sum(row(key) * success_traces(code, x, scenario, jj)))

    if word is not None:
        key = (tuple(word), j) if scenario == 2 else tuple(word)
        return conditional(key)
    table = by_pair if scenario == 2 else by_word
    total = sum(c * conditional(key) for key, (c, _) in sorted(table.items()))
    return total / (code.J * code.K)
