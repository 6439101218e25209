"""Method of types: typical sequences and typical subspaces.

Typical projectors are diagonal in a product eigenbasis, so they are stored
as one basis per tensor factor plus a boolean mask over basis-index
sequences.  Traces against product states then reduce to sums of products
of diagonal entries, and the dense matrix is only built on request.
"""

import csv
import io
import itertools
from dataclasses import dataclass, field
from functools import reduce
from math import comb, prod

import numpy as np

from .channels import CQChannel
from .exceptions import DimensionOverflow, EnumerationOverflow, PermutationChangesWord, ValidationError
from .operators import canonical_eigh, dim_cap, make_distribution, shannon_entropy

ENUM_CAP = 10 ** 6
_SLACK = 1e-12


def _check_enumeration(k, n, cap=ENUM_CAP):
    if k ** n > cap:
        raise EnumerationOverflow(f"{k}^{n} sequences exceed the enumeration cap {cap}",
                                  alphabet_size=k, n=n, cap=cap)


def all_words(k, n):
    """All words of length ``n`` over ``range(k)`` in lexicographic order, shape ``(k**n, n)``."""
    _check_enumeration(k, n)
    if n == 0:
        return np.zeros((1, 0), dtype=int)
    return np.indices((k,) * n).reshape(n, -1).T


def counts_of(words, k):
    """Symbol counts of each row of ``words``, shape ``(m, k)``."""
    words = np.atleast_2d(words)
    return np.stack([(words == a).sum(axis=1) for a in range(k)], axis=1)


@dataclass(frozen=True)
class TypeClass:
    """Type of a word: the count of every symbol."""

    alphabet: tuple
    n: int
    counts: tuple

    def __post_init__(self):
        if len(self.counts) != len(self.alphabet):
            raise ValidationError("counts and alphabet differ in length")
        if any(c < 0 for c in self.counts) or sum(self.counts) != self.n:
            raise ValidationError(f"counts {self.counts} are not a composition of {self.n}")

    @classmethod
    def of(cls, word, k):
        counts = tuple(int(c) for c in counts_of(np.asarray(word, dtype=int)[None], k)[0])
        return cls(tuple(range(k)), len(word), counts)

    @property
    def distribution(self):
        return np.asarray(self.counts, dtype=float) / max(self.n, 1)

    @property
    def size(self):
        """Number of words of this type (a multinomial coefficient)."""
        out, left = 1, self.n
        for c in self.counts:
            out *= comb(left, c)
            left -= c
        return out


def is_typical_counts(counts, n, P, delta):
    """``|N(a)/n - P(a)| <= delta/|A|`` for all ``a``; vectorised over rows of counts."""
    P = np.asarray(P, dtype=float)
    if n == 0:
        return np.ones(np.shape(counts)[:-1], dtype=bool)
    dev = np.abs(np.asarray(counts) / n - P)
    return np.all(dev <= delta / P.size + _SLACK, axis=-1)


def typical_mask(P, n, delta):
    """Boolean array of shape ``(k,) * n`` marking the typical words."""
    P = np.asarray(P, dtype=float)
    k = P.size
    words = all_words(k, n)
    return is_typical_counts(counts_of(words, k), n, P, delta).reshape((k,) * n)


def _check_typical_args(n, delta):
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if delta < 0:
        raise ValidationError(f"delta must be non-negative, got {delta}")


def typical_set(P, n, delta):
    """Typical words ``T^n_{P,delta}`` as a list of index tuples (lexicographic).

    Raises
    ------
    EnumerationOverflow
        When ``|A|^n`` exceeds the enumeration cap.
    """
    _check_typical_args(n, delta)
    P = make_distribution(P)
    words = all_words(P.size, n)
    keep = is_typical_counts(counts_of(words, P.size), n, P, delta)
    return [tuple(int(a) for a in w) for w in words[keep]]


def nearest_type(P, n):
    """Counts of the length-``n`` type closest to ``P`` (largest remainder rounding)."""
    P = make_distribution(P)
    raw = P * n
    counts = np.floor(raw).astype(int)
    rem = n - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:rem]] += 1
    return counts


def canonical_word(P, n):
    """Sorted word whose type is :func:`nearest_type` of ``P``."""
    counts = nearest_type(P, n)
    return tuple(int(a) for a, c in enumerate(counts) for _ in range(c))


def _compositions(total, parts):
    # stars and bars, lexicographic
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 1 - prev - 1)
        yield out


def enumerate_conditional_types(x_seq, n_states, n_inputs=None, cap=ENUM_CAP):
    """All conditional types ``Q(s|x)`` compatible with the word ``x_seq``.

    Row ``x`` ranges over the distributions with denominator ``N(x|x_seq)``.
    Rows of symbols absent from the word carry no information and are set to
    uniform.  Returns a list of arrays of shape ``(n_inputs, n_states)``.
    """
    x_seq = tuple(int(x) for x in x_seq)
    if n_inputs is None:
        n_inputs = max(x_seq) + 1 if x_seq else 1
    N = np.bincount(np.asarray(x_seq, dtype=int), minlength=n_inputs) if x_seq else np.zeros(n_inputs, int)
    sizes = [comb(int(c) + n_states - 1, n_states - 1) for c in N if c > 0]
    total = prod(sizes)
    if total > cap:
        raise EnumerationOverflow(f"{total} conditional types exceed the cap {cap}", count=total)
    per_row = []
    for c in N:
        if c == 0:
            per_row.append([np.full(n_states, 1.0 / n_states)])
        else:
            per_row.append([np.asarray(comp, dtype=float) / c for comp in _compositions(int(c), n_states)])
    return [np.stack(rows) for rows in itertools.product(*per_row)]


# -- projectors ------------------------------------------------------------------


def _is_permutation(u, atol=1e-14):
    a = np.abs(u)
    return bool(np.all((a < atol) | (np.abs(a - 1) < atol)) and np.all(np.sum(a > 0.5, axis=0) == 1))


class TypicalProjector:
    """Projector ``sum_{j in mask} |u_j><u_j|`` with ``|u_j> = (x)_i bases[i][:, j_i]``.

    Attributes
    ----------
    bases : tuple of ndarray
        One ``d x d`` unitary per tensor factor (columns are basis vectors).
    mask : ndarray of bool, shape ``(d,) * n``
    """

    def __init__(self, bases, mask):
        self.bases = tuple(np.asarray(b) for b in bases)
        self.mask = np.asarray(mask, dtype=bool)
        if self.mask.shape != (self.d,) * self.n:
            raise ValidationError(f"mask shape {self.mask.shape} does not match {self.n} factors")

    @property
    def n(self):
        return len(self.bases)

    @property
    def d(self):
        return self.bases[0].shape[0] if self.bases else 1

    @property
    def dim(self):
        return self.d ** self.n

    @property
    def rank(self):
        return int(self.mask.sum())

    @property
    def basis_labels(self):
        """Index sequences spanning the range (eigenbasis labels)."""
        return [tuple(int(i) for i in idx) for idx in np.argwhere(self.mask)]

    @property
    def is_diagonal(self):
        """True when every factor basis is a permutation of the standard basis."""
        return all(_is_permutation(b) for b in self.bases)

    def diagonal(self):
        """Diagonal in the computational basis; only valid when :attr:`is_diagonal`."""
        if not self.is_diagonal:
            raise ValidationError("projector is not diagonal in the computational basis")
        t = self.mask.astype(float)
        for i, b in enumerate(self.bases):
            # eigen-index j sits at computational index perm[j]
            perm = np.argmax(np.abs(b), axis=0)
            inv = np.argsort(perm)
            t = np.take(t, inv, axis=i)
        return t.reshape(-1)

    def dense(self):
        if self.is_diagonal:
            return np.diag(self.diagonal()).astype(complex)
        U = reduce(np.kron, self.bases)
        m = self.mask.reshape(-1)
        Um = U[:, m]
        return Um @ Um.conj().T

    @property
    def projector(self):
        return self.dense()

    def operator(self):
        """Diagonal vector when possible, dense matrix otherwise."""
        return self.diagonal() if self.is_diagonal else self.dense()

    def factor_diagonals(self, states):
        """``<u_j| rho_i |u_j>`` for every factor ``i``; list of real vectors."""
        return [np.real(np.einsum("ij,ik,kj->j", b.conj(), np.asarray(r), b))
                for b, r in zip(self.bases, states)]

    def sequence_weights(self, states):
        """Array over index sequences of ``prod_i <u_{j_i}| rho_i |u_{j_i}>``."""
        diags = self.factor_diagonals(states)
        return reduce(np.multiply.outer, diags) if diags else np.ones(())

    def trace_product(self, states):
        """``tr[(rho_1 (x) ... (x) rho_n) Pi]`` without forming the tensor product."""
        if len(states) != self.n:
            raise ValidationError(f"expected {self.n} factors, got {len(states)}")
        return float(np.sum(self.sequence_weights(states)[self.mask]))


def _check_dim(d, n):
    cap = dim_cap()
    if d ** n > cap:
        raise DimensionOverflow(f"dimension {d}^{n} exceeds the cap {cap}", d=d, n=n, cap=cap)


def _spectrum(w):
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    return w / w.sum()


def typical_projector(sigma, n, alpha):
    """Projector onto the ``alpha``-typical subspace of ``sigma^{(x) n}``.

    Spanned by eigenbasis products whose index sequence is typical for the
    spectrum of ``sigma`` with ``delta = alpha``.
    """
    _check_typical_args(n, alpha)
    sigma = np.asarray(sigma)
    d = sigma.shape[0]
    _check_dim(d, n)
    w, u = canonical_eigh(sigma)
    return TypicalProjector([u] * n, typical_mask(_spectrum(w), n, alpha))


def cond_typical_projector(V, x_seq, alpha):
    """Conditional typical projector ``Pi_{V,alpha}(x^n)``.

    For every input symbol ``x`` the positions ``I_x`` carrying ``x`` are
    required to hold an index sequence typical for the spectrum of ``V(x)``.
    """
    states = V.states if isinstance(V, CQChannel) else np.asarray(V)
    x_seq = tuple(int(x) for x in x_seq)
    n = len(x_seq)
    _check_typical_args(n, alpha)
    if max(x_seq) >= states.shape[0] or min(x_seq) < 0:
        raise ValidationError("word uses symbols outside the channel's input alphabet")
    d = states.shape[1]
    _check_dim(d, n)
    eig = {x: canonical_eigh(states[x]) for x in set(x_seq)}
    idx = all_words(d, n)
    keep = np.ones(idx.shape[0], dtype=bool)
    xs = np.asarray(x_seq)
    for x, (w, _) in eig.items():
        pos = np.flatnonzero(xs == x)
        keep &= is_typical_counts(counts_of(idx[:, pos], d), pos.size, _spectrum(w), alpha)
    return TypicalProjector([eig[x][1] for x in x_seq], keep.reshape((d,) * n))


def permute_factors(op, d, n, perm):
    """``U_pi op U_pi^dagger`` where ``U_pi`` moves factor ``i`` to ``perm[i]``.

    ``op`` is a dense ``(d^n, d^n)`` matrix or a diagonal vector.
    """
    # factor i of the output is factor inv[i] of the input
    inv = tuple(int(i) for i in np.argsort(perm))
    op = np.asarray(op)
    if op.ndim == 1:
        return op.reshape((d,) * n).transpose(inv).reshape(-1)
    t = op.reshape((d,) * (2 * n))
    return t.transpose(inv + tuple(n + i for i in inv)).reshape(d ** n, d ** n)


def permutation_invariance_check(projector, x_seq, permutation, d=None):
    """Operator-norm residual ``||Pi - U_pi Pi U_pi^dagger||``.

    Raises
    ------
    PermutationChangesWord
        When ``permutation`` does not fix ``x_seq``.
    """
    x_seq = tuple(int(x) for x in x_seq)
    perm = tuple(int(p) for p in permutation)
    n = len(x_seq)
    if sorted(perm) != list(range(n)):
        raise ValidationError(f"{perm} is not a permutation of {n} positions")
    if any(x_seq[perm[i]] != x_seq[i] for i in range(n)):
        raise PermutationChangesWord("permutation changes the word", word=list(x_seq),
                                     permutation=list(perm))
    if isinstance(projector, TypicalProjector):
        d = projector.d
        op = projector.operator()
    else:
        op = np.asarray(projector)
        if d is None:
            d = int(round(op.shape[0] ** (1.0 / n)))
    diff = op - permute_factors(op, d, n, perm)
    if diff.ndim == 1:
        return float(np.max(np.abs(diff))) if diff.size else 0.0
    return float(np.linalg.norm(diff, 2))


# -- report ------------------------------------------------------------------------


@dataclass
class TypicalityRow:
    property: str
    n: int
    alpha: float
    lhs: float
    rhs: float
    margin: float


@dataclass
class TypicalityReport:
    """Both sides of each typical-subspace inequality, with fitted constants.

    ``constants[(name, alpha)]`` holds the fitted constant.  Exponents
    ``beta`` are fitted as the least-squares constant of
    ``-log2(1 - value) / n`` (``*_lsq``); margins use the certified exponent
    ``beta = min_n(-log2(1 - value) / n) / 2``, which makes the inequality
    strict at every tested ``n`` whenever the exponent is positive.
    """

    rows: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def select(self, prop, alpha=None):
        return [r for r in self.rows if r.property == prop and (alpha is None or r.alpha == alpha)]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["property", "n", "alpha", "lhs", "rhs", "margin"])
        for r in self.rows:
            w.writerow([r.property, r.n, repr(float(r.alpha)), repr(float(r.lhs)),
                        repr(float(r.rhs)), repr(float(r.margin))])
        return buf.getvalue()

    def to_dict(self):
        return {
            "rows": [vars(r) for r in self.rows],
            "constants": {f"{k[0]}@{k[1]}": v for k, v in self.constants.items()},
            "checks": dict(self.checks),
        }


def _margin(a, b):
    # an empty projector gives -inf on both sides; count that as a violation
    with np.errstate(invalid="ignore"):
        m = a - b
    return -np.inf if np.isnan(m) else float(m)


def _fit_exponent(ns, values):
    """Fitted and certified exponents for ``value >= 1 - 2^{-n beta}``."""
    ns = np.asarray(ns, dtype=float)
    y = np.array([-np.log2(1.0 - v) if v < 1.0 else np.inf for v in values])
    z = y / ns
    finite = np.isfinite(z)
    if not finite.any():
        return 1.0, 1.0
    lsq = float(np.mean(z[finite]))
    cert = 0.5 * float(np.min(z[finite]))
    return lsq, cert


def _trace_rows(report, name, alpha, ns, values):
    lsq, cert = _fit_exponent(ns, values)
    report.constants[(f"{name}_lsq", alpha)] = lsq
    report.constants[(name, alpha)] = cert
    for n, v in zip(ns, values):
        rhs = 1.0 - 2.0 ** (-n * cert)
        report.rows.append(TypicalityRow(f"{name.split('_')[0]}", n, alpha, v, rhs, v - rhs))


def _cardinality_rows(report, prop, cname, alpha, ns, ranks, entropy):
    with np.errstate(divide="ignore"):
        logs = np.log2(np.asarray(ranks, dtype=float))
    delta = float(np.max(np.abs(logs / np.asarray(ns) - entropy)))
    report.constants[(cname, alpha)] = delta
    for n, lr in zip(ns, logs):
        lo, hi = n * (entropy - delta), n * (entropy + delta)
        report.rows.append(TypicalityRow(f"{prop}_lower", n, alpha, lr, lo, _margin(lr, lo)))
        report.rows.append(TypicalityRow(f"{prop}_upper", n, alpha, hi, lr, _margin(hi, lr)))


def _spectral_rows(report, prop, cname, alpha, ns, extremes, entropy):
    """Rows for ``2^{-n(S+g)} Pi <= Pi rho Pi <= 2^{-n(S-g)} Pi``; extremes are log2 values."""
    gam = 0.0
    for n, (lo, hi) in zip(ns, extremes):
        gam = max(gam, abs(-lo / n - entropy), abs(-hi / n - entropy))
    report.constants[(cname, alpha)] = gam
    for n, (lo, hi) in zip(ns, extremes):
        b_lo, b_hi = -n * (entropy + gam), -n * (entropy - gam)
        report.rows.append(TypicalityRow(f"{prop}_lower", n, alpha, lo, b_lo, _margin(lo, b_lo)))
        report.rows.append(TypicalityRow(f"{prop}_upper", n, alpha, b_hi, hi, _margin(b_hi, hi)))


def _log_extremes(weights, mask):
    w = weights[mask]
    if w.size == 0:
        return -np.inf, -np.inf
    with np.errstate(divide="ignore"):
        lw = np.log2(w)
    return float(lw.min()), float(lw.max())


def typicality_report(sigma=None, channel=None, x_seq=None, P=None, n=(2, 4, 6, 8),
                      alpha=(0.5, 1.0)):
    """Evaluate both sides of the typical-subspace properties.

    Parameters
    ----------
    sigma : ndarray, optional
        State for the unconditional properties (te1, te2, te3).
    channel : CQChannel or ndarray, optional
        Channel for the conditional properties (te4 to te7).
    x_seq : sequence, optional
        Input word for a single block length; alternatively ``P`` gives the
        input type and :func:`canonical_word` supplies a word per ``n``.
    n, alpha : int/float or sequences
        Sweep over block lengths and typicality parameters.

    Returns
    -------
    TypicalityReport
    """
    ns = [int(n)] if np.isscalar(n) else [int(v) for v in n]
    alphas = [float(alpha)] if np.isscalar(alpha) else [float(a) for a in alpha]
    report = TypicalityReport()
    if sigma is None and channel is None:
        raise ValidationError("give sigma, channel, or both")
    if sigma is not None:
        sigma = np.asarray(sigma)
        w, _ = canonical_eigh(sigma)
        S = shannon_entropy(_spectrum(w))
        for a in alphas:
            vals, ranks, ext = [], [], []
            for m in ns:
                Pi = typical_projector(sigma, m, a)
                weights = Pi.sequence_weights([sigma] * m)
                vals.append(float(weights[Pi.mask].sum()))
                ranks.append(Pi.rank)
                ext.append(_log_extremes(weights, Pi.mask))
                expected = len(typical_set(_spectrum(w), m, a))
                report.checks[f"te2_rank_equals_typical_set@n={m},alpha={a}"] = Pi.rank == expected
            _trace_rows(report, "te1_beta", a, ns, vals)
            _cardinality_rows(report, "te2", "te2_delta", a, ns, ranks, S)
            _spectral_rows(report, "te3", "te3_gamma", a, ns, ext, S)
    if channel is not None:
        states = channel.states if isinstance(channel, CQChannel) else np.asarray(channel)
        if x_seq is not None:
            words = {len(x_seq): tuple(int(x) for x in x_seq)}
            ns_c = [len(x_seq)]
        elif P is not None:
            ns_c = ns
            words = {m: canonical_word(P, m) for m in ns}
        else:
            raise ValidationError("conditional properties need x_seq or P")
        nx = states.shape[0]
        for a in alphas:
            v4, r6, e5, v7, s_cond = [], [], [], [], []
            for m in ns_c:
                word = words[m]
                Pt = np.bincount(word, minlength=nx) / m
                S_cond = float(sum(Pt[x] * shannon_entropy(_spectrum(canonical_eigh(states[x])[0]))
                                   for x in range(nx) if Pt[x] > 0))
                s_cond.append(S_cond)
                Pi = cond_typical_projector(states, word, a)
                weights = Pi.sequence_weights([states[x] for x in word])
                v4.append(float(weights[Pi.mask].sum()))
                r6.append(Pi.rank)
                e5.append(_log_extremes(weights, Pi.mask))
                mean_state = np.einsum("x,xij->ij", Pt, states)
                Pi7 = typical_projector(mean_state, m, a)
                v7.append(Pi7.trace_product([states[x] for x in word]))
            # the conditional entropy depends on the word's type; use per-n values
            _trace_rows(report, "te4_beta_prime", a, ns_c, v4)
            _cond_cardinality(report, a, ns_c, r6, s_cond)
            _cond_spectral(report, a, ns_c, e5, s_cond)
            _trace_rows(report, "te7_beta_dprime", a, ns_c, v7)
    return report


def _cond_cardinality(report, a, ns, ranks, entropies):
    with np.errstate(divide="ignore"):
        logs = np.log2(np.asarray(ranks, dtype=float))
    delta = float(max(abs(lr / m - S) for lr, m, S in zip(logs, ns, entropies)))
    report.constants[("te6_delta_prime", a)] = delta
    for m, lr, S in zip(ns, logs, entropies):
        lo, hi = m * (S - delta), m * (S + delta)
        report.rows.append(TypicalityRow("te6_lower", m, a, lr, lo, _margin(lr, lo)))
        report.rows.append(TypicalityRow("te6_upper", m, a, hi, lr, _margin(hi, lr)))


def _cond_spectral(report, a, ns, extremes, entropies):
    gam = float(max(max(abs(-lo / m - S), abs(-hi / m - S))
                    for (lo, hi), m, S in zip(extremes, ns, entropies)))
    report.constants[("te5_gamma_prime", a)] = gam
    for m, (lo, hi), S in zip(ns, extremes, entropies):
        b_lo, b_hi = -m * (S + gam), -m * (S - gam)
        report.rows.append(TypicalityRow("te5_lower", m, a, lo, b_lo, _margin(lo, b_lo)))
        report.rows.append(TypicalityRow("te5_upper", m, a, b_hi, hi, _margin(b_hi, hi)))
