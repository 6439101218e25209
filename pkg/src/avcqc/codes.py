"""Random correlated codes for an AVCQC at small block length.

A code is a uniformly keyed family of ``K`` codebooks with ``J`` codewords
each, drawn from a ground set of ``I`` words of one input type.  Decoding
uses the square-root measurement built from per-word universal projectors.
Scenario 1 draws every codebook as an injective tuple of ground-set indices;
scenario 2 partitions the ground set into ``J`` blocks and draws the word for
message ``j`` from block ``j`` only.

Operators on ``H^{(x) n}`` are 1-D diagonals when the channel is classical
(all outputs diagonal) and dense matrices otherwise.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np
from sklearn.base import BaseEstimator

from . import __version__
from .capacity import inner_min, solve
from .channels import AVCQC, double_bar, dump_spec, load_spec, product_traces
from .exceptions import (
    DomainError,
    InfeasiblePlan,
    NumericalRankFailure,
    PartitionError,
    PreconditionViolated,
    ResampleBudgetExceeded,
    ValidationError,
)
from .operators import POVM, TOL_HERM, TOL_PSD, hermitian_part
from .typicality import (
    all_words,
    canonical_word,
    cond_typical_projector,
    counts_of,
    enumerate_conditional_types,
    nearest_type,
    permutation_invariance_check,
)
from .validation import check_channel, check_seed

logger = logging.getLogger(__name__)

A2 = mpmath.mpf(1) / 27
RESAMPLE_BUDGET = 64
RANK_TOL = 1e-10
# eigenvalues of T inside this band cannot be classified as zero or non-zero
AMBIGUOUS_BAND = (1e-12, 1e-8)


# -- parameter plans --------------------------------------------------------------


@dataclass
class ParameterPlan:
    """Block length, code sizes and construction constants.

    ``log2_A`` stores ``log2 A_n``.  ``constraints`` records every
    inequality the construction relies on together with whether it holds;
    ``overrides`` lists the quantities a desk plan sets differently from the
    asymptotic recipe.
    """

    n: int
    epsilon: float
    lam: float
    log2_A: float
    I_size: int
    J_size: int
    K_size: int
    mu: float
    lam_prime: float
    lam_prime_realized: float
    a1: float
    a2: float
    n_inputs: int
    n_states: int
    C_P: float
    eta: float = None
    kind: str = "paper"
    alpha: float = 0.5
    input_type: tuple = None
    K_routes: dict = field(default_factory=dict)
    constraints: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    @property
    def A(self):
        return 2.0 ** self.log2_A

    @property
    def rate(self):
        return math.log2(self.J_size) / self.n if self.J_size > 0 else float("-inf")

    def to_dict(self):
        out = asdict(self)
        out["input_type"] = list(self.input_type) if self.input_type is not None else None
        return out

    @classmethod
    def manual(cls, n, I_size, J_size, K_size, n_inputs, n_states, log2_A=0.0, mu=0.5,
               lam_prime=None, alpha=0.5, input_type=None):
        """Hand-set plan for small experiments; nothing is derived."""
        lam_prime = mu if lam_prime is None else lam_prime
        return cls(n=n, epsilon=float("nan"), lam=float("nan"), log2_A=float(log2_A),
                   I_size=I_size, J_size=J_size, K_size=K_size, mu=float(mu),
                   lam_prime=float(lam_prime), lam_prime_realized=float(lam_prime),
                   a1=float("nan"), a2=float(A2), n_inputs=n_inputs, n_states=n_states,
                   C_P=float("nan"), kind="manual", alpha=float(alpha),
                   input_type=None if input_type is None else tuple(input_type))

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if data.get("input_type") is not None:
            data["input_type"] = tuple(data["input_type"])
        return cls(**data)


def _I_from_recipe(n, log_xs, A):
    """Smallest ``a1 > 1/(3-e)`` making ``a1 n ln|X||S| / A_n`` an integer."""
    base = n * log_xs / A
    a1_min = 1 / (3 - mpmath.e)
    I_size = int(mpmath.floor(a1_min * base)) + 1
    return I_size, I_size / base


def _k_routes(n, lam, log_xs, a1, A):
    """``K`` from the composed formula and from ``a n^2 / lambda^3``."""
    lam_p = A2 * lam
    I_real = a1 * n * log_xs / A
    J_real = (A2 * lam) ** 2 / A
    composed = 32 * n * I_real * log_xs / (lam_p * J_real)
    a = 32 * a1 * log_xs ** 2 / A2 ** 3
    substituted = a * n ** 2 / lam ** 3
    return composed, substituted, a


def parameter_plan(epsilon, lam, n, n_inputs, n_states, C_P, eta=None, strict=False):
    """Parameters of the asymptotic construction at block length ``n``.

    ``A_n = 2^{-n (C_P - epsilon/2)}``, ``a1`` is the smallest admissible
    constant making ``I`` integral, ``mu = lambda' = lambda / 27``,
    ``J = floor(mu^2 / A_n)`` and ``K = floor(a n^2 / lambda^3)``.  The
    condition ``lambda >= max(2^{-n eta/3}, 2^{-n epsilon/5})`` is recorded in
    ``constraints`` and only enforced when ``strict`` is set.

    Raises
    ------
    InfeasiblePlan
        When ``J < 1``, ``lambda' >= 1`` or ``I >= |X|^n``.
    PreconditionViolated
        With ``strict=True`` when the lambda condition fails.
    """
    if n < 1 or not 0 < lam < 1 or epsilon <= 0:
        raise ValidationError("need n >= 1, 0 < lambda < 1 and epsilon > 0")
    with mpmath.workdps(50):
        lam_m = mpmath.mpf(lam)
        log_xs = mpmath.log(n_inputs * n_states)
        log2_A = -n * (mpmath.mpf(C_P) - mpmath.mpf(epsilon) / 2)
        A = mpmath.power(2, log2_A)
        if log_xs == 0:
            raise InfeasiblePlan("|X||S| = 1 leaves nothing to code")
        I_size, a1 = _I_from_recipe(n, log_xs, A)
        mu = A2 * lam_m
        J_size = int(mpmath.floor(mu ** 2 / A))
        composed, substituted, a = _k_routes(n, lam_m, log_xs, a1, A)
        K_size = int(mpmath.floor(substituted))
        routes = {
            "composed": mpmath.nstr(composed, 30),
            "substituted": mpmath.nstr(substituted, 30),
            "a": mpmath.nstr(a, 30),
            "agree": int(mpmath.floor(composed)) == K_size,
        }
        lam_real = float(A * J_size / mu) if J_size > 0 else 0.0
        need = [mpmath.power(2, -n * mpmath.mpf(epsilon) / 5)]
        if eta is not None:
            need.append(mpmath.power(2, -n * mpmath.mpf(eta) / 3))
        lam_ok = bool(lam_m >= max(need))
        j_space = float(J_size) * float(A) <= 1.0
    constraints = {
        "lambda_precondition": {"holds": lam_ok, "required": float(max(need)),
                                "eta_known": eta is not None},
        "I_below_words": {"holds": I_size < n_inputs ** n},
        "J_at_least_1": {"holds": J_size >= 1},
        "J_at_most_inverse_A": {"holds": j_space},
        "lambda_prime_below_1": {"holds": lam_real < 1},
    }
    plan = ParameterPlan(
        n=n, epsilon=float(epsilon), lam=float(lam), log2_A=float(log2_A), I_size=I_size,
        J_size=J_size, K_size=K_size, mu=float(mu), lam_prime=float(mu),
        lam_prime_realized=lam_real, a1=float(a1), a2=float(A2), n_inputs=n_inputs,
        n_states=n_states, C_P=float(C_P), eta=eta, kind="paper", K_routes=routes,
        constraints=constraints)
    if J_size < 1:
        raise InfeasiblePlan(f"J = floor((lambda/27)^2 / A_n) = 0 at n={n}", plan=plan.to_dict())
    if I_size >= n_inputs ** n:
        raise InfeasiblePlan(f"I = {I_size} is not below |X|^n = {n_inputs ** n}", plan=plan.to_dict())
    if lam_real >= 1:
        raise InfeasiblePlan("lambda' >= 1", plan=plan.to_dict())
    if strict and not lam_ok:
        raise PreconditionViolated("lambda below max(2^{-n eta/3}, 2^{-n epsilon/5})",
                                   required=float(max(need)), lam=float(lam))
    return plan


def desk_plan(W, n, rate=None, capacity=None, P=None, alpha=0.5, scenario=1, tol=1e-6):
    """Plan that is buildable at desk-scale ``n``.

    The input type is the ``n``-type nearest ``P`` (the capacity-achieving
    distribution by default) and ``C_P`` its worst-case Holevo quantity.  The
    rate defaults to half the capacity and ``epsilon = C_P - rate``.
    ``A_n`` and ``I`` follow the asymptotic recipe; the remaining sizes are
    set so that the counting constraints are attainable:

    * ``J = floor(2^{n rate})`` (at least 1),
    * ``mu = lambda' = sqrt(A_n J)`` so that ``lambda' = A_n J / mu``,
    * ``K = ceil((32/3) ln(2 I) I / J)``, the smallest size for which the
      union bound over ``i`` keeps ``|K(i)| >= K J / (2 I)`` likely.

    In scenario 2, ``I`` is rounded up to a multiple of ``J``.
    """
    W = check_channel(W)
    if P is None or capacity is None:
        res = solve(W, tol=tol, swapped=False)
        capacity = res.value if capacity is None else capacity
        P = res.P_star if P is None else P
    counts = nearest_type(P, n)
    P_X = counts / n
    C_P = inner_min(W, P_X, tol=tol)[1]
    rate = capacity / 2 if rate is None else rate
    epsilon = C_P - rate
    if epsilon <= 0:
        raise InfeasiblePlan(f"rate {rate:.4g} is not below C_P = {C_P:.4g} at n={n}")
    log_xs = math.log(W.n_inputs * W.n_states)
    log2_A = -n * (C_P - epsilon / 2)
    A = 2.0 ** log2_A
    with mpmath.workdps(50):
        I_size, a1 = _I_from_recipe(n, mpmath.mpf(log_xs), mpmath.power(2, mpmath.mpf(log2_A)))
    overrides = {}
    J_size = max(1, int(math.floor(2.0 ** (n * rate) + 1e-9)))
    overrides["J_size"] = "floor(2^{n rate})"
    if scenario == 2 and I_size % J_size:
        I_size += J_size - I_size % J_size
        overrides["I_size"] = "rounded up to a multiple of J"
    mu = math.sqrt(A * J_size)
    overrides["mu"] = "sqrt(A_n J)"
    K_size = int(math.ceil(32 / 3 * math.log(2 * I_size) * I_size / J_size))
    overrides["K_size"] = "ceil((32/3) ln(2I) I / J)"
    word = canonical_word(P_X, n)
    eta = certify_universal(W, word, alpha)["eta_hat"]
    lam = 27 * mu
    constraints = {
        "I_below_words": {"holds": I_size < W.n_inputs ** n},
        "J_at_most_inverse_A": {"holds": J_size * A <= 1.0},
        "lambda_prime_below_1": {"holds": mu < 1},
        "JK_condition": {"holds": 3 / 32 * mu * K_size * J_size / I_size > 2 * n * log_xs},
        "lambda_precondition": {"holds": lam >= max(2 ** (-n * epsilon / 5),
                                                    2 ** (-n * eta / 3) if np.isfinite(eta) else 0.0)},
    }
    return ParameterPlan(
        n=n, epsilon=float(epsilon), lam=float(lam), log2_A=float(log2_A), I_size=I_size,
        J_size=J_size, K_size=K_size, mu=float(mu), lam_prime=float(mu),
        lam_prime_realized=float(A * J_size / mu), a1=float(a1), a2=float(A2),
        n_inputs=W.n_inputs, n_states=W.n_states, C_P=float(C_P), eta=float(eta),
        kind="desk", alpha=float(alpha), input_type=tuple(int(c) for c in counts),
        constraints=constraints, overrides=overrides)


# -- operator helpers --------------------------------------------------------------


def _identity_like(op):
    return np.ones(op.shape[0]) if op.ndim == 1 else np.eye(op.shape[0], dtype=complex)


def _range_projector(M, tol=RANK_TOL):
    w, v = np.linalg.eigh(hermitian_part(M))
    keep = w > tol
    return (v[:, keep] @ v[:, keep].conj().T), int(keep.sum())


def _inv_sqrt(T, band=AMBIGUOUS_BAND):
    """``T^{-1/2}`` on the support of ``T`` (pseudo-inverse)."""
    if T.ndim == 1:
        w = np.real(T)
        if np.any((w > band[0]) & (w < band[1])):
            raise NumericalRankFailure("spectrum of T straddles the rank threshold")
        out = np.zeros_like(w)
        pos = w > RANK_TOL
        out[pos] = 1 / np.sqrt(w[pos])
        return out
    w, v = np.linalg.eigh(hermitian_part(T))
    if np.any((w > band[0]) & (w < band[1])):
        raise NumericalRankFailure("spectrum of T straddles the rank threshold",
                                   eigenvalues=[float(x) for x in w if band[0] < x < band[1]])
    inv = np.where(w > RANK_TOL, 1 / np.sqrt(np.clip(w, RANK_TOL, None)), 0.0)
    return (v * inv) @ v.conj().T


# -- universal projectors ----------------------------------------------------------


@dataclass
class UniversalProjector:
    """Projector ``P(x)`` for one word; ``operator`` is a diagonal or dense matrix."""

    word: tuple
    operator: np.ndarray
    rank: int
    alpha: float

    @property
    def dim(self):
        return self.operator.shape[0]


def universal_projector(W, x_seq, alpha=0.5):
    """Projector onto the span of all conditional typical subspaces of ``x_seq``.

    The union runs over every conditional type ``Q`` compatible with
    ``x_seq``, using the averaged channel ``x -> sum_s Q(s|x) rho(x, s)``.
    Any jammer sequence induces one of these conditional types, which is
    what makes the projector universal over the jammer.
    """
    W = check_channel(W)
    x_seq = tuple(int(x) for x in x_seq)
    types = enumerate_conditional_types(x_seq, W.n_states, W.n_inputs)
    if W.is_classical:
        cover = None
        for Q in types:
            diag = cond_typical_projector(double_bar(W, Q), x_seq, alpha).diagonal()
            cover = diag if cover is None else np.maximum(cover, diag)
        return UniversalProjector(x_seq, cover, int(round(cover.sum())), alpha)
    S = None
    for Q in types:
        P = cond_typical_projector(double_bar(W, Q), x_seq, alpha).dense()
        S = P if S is None else S + P
    proj, rank = _range_projector(S)
    return UniversalProjector(x_seq, proj, rank, alpha)


def _tensor_trace(states_per_pos, op):
    """``tr[(rho_1 (x) ... (x) rho_n) op]`` for a diagonal or dense ``op``."""
    n = len(states_per_pos)
    d = states_per_pos[0].shape[0]
    if op.ndim == 1:
        t = op.reshape((d,) * n)
        for r in states_per_pos:
            t = np.tensordot(t, np.real(np.diag(r)), axes=([0], [0]))
        return float(t)
    t = op.reshape((d,) * (2 * n))
    m = n
    for r in states_per_pos:
        t = np.tensordot(t, r, axes=([0, m], [1, 0]))
        m -= 1
    return float(np.real(t))


def certify_universal(W, x_seq, alpha=0.5, projector=None, max_transpositions=None):
    """Measure the three universal-projector properties for one word.

    Returns a dict with

    * ``eta_hat``: ``-(1/n) log2(1 - min_Q tr(rho_Q^{(x) n}(x) P(x)))`` (property i),
    * ``nu_hat``: smallest ``nu`` with ``tr(rho_{Q,X}^{(x) n} P(x)) <=
      2^{-n (min chi - nu)}`` over all conditional types (property ii),
    * ``perm_residual``: largest residual over transpositions fixing ``x``
      (property iii).
    """
    W = check_channel(W)
    x_seq = tuple(int(x) for x in x_seq)
    n = len(x_seq)
    up = projector or universal_projector(W, x_seq, alpha)
    op = up.operator
    P_X = np.bincount(x_seq, minlength=W.n_inputs) / n
    chi_min = inner_min(W, P_X)[1]
    worst_hit, nu = 1.0, -np.inf
    for Q in enumerate_conditional_types(x_seq, W.n_states, W.n_inputs):
        V = double_bar(W, Q).states
        worst_hit = min(worst_hit, _tensor_trace([V[x] for x in x_seq], op))
        mean = np.einsum("x,xij->ij", P_X, V)
        t = _tensor_trace([mean] * n, op)
        nu = max(nu, chi_min + (math.log2(t) / n if t > 0 else -np.inf))
    miss = max(1.0 - worst_hit, 0.0)
    eta = -math.log2(miss) / n if miss > 0 else float("inf")
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if x_seq[a] == x_seq[b]]
    if max_transpositions is not None:
        pairs = pairs[:max_transpositions]
    resid = 0.0
    for a, b in pairs:
        perm = list(range(n))
        perm[a], perm[b] = b, a
        resid = max(resid, permutation_invariance_check(op, x_seq, perm, d=W.dim))
    return {"eta_hat": eta, "min_hit": worst_hit, "nu_hat": nu, "chi_min": chi_min,
            "perm_residual": resid, "rank": up.rank}


# -- ground set ---------------------------------------------------------------


@dataclass
class GroundSet:
    words: np.ndarray
    input_type: tuple
    attempts: int
    max_lhs: float
    bound: float
    argmax: tuple = None
    seed: int = None

    @property
    def size(self):
        return self.words.shape[0]


def type_class(counts):
    """All words with the given symbol counts, lexicographic."""
    counts = np.asarray(counts, dtype=int)
    words = all_words(counts.size, int(counts.sum()))
    return words[np.all(counts_of(words, counts.size) == counts, axis=1)]


class _ProjectorCache:
    def __init__(self, W, alpha):
        self.W, self.alpha, self._cache = W, alpha, {}

    def __call__(self, word):
        word = tuple(int(x) for x in word)
        if word not in self._cache:
            self._cache[word] = universal_projector(self.W, word, self.alpha).operator
        return self._cache[word]


def _ground_lhs(W, words, projectors, probe_words):
    """``max_{x, s} sum_i tr[rho(x, s) P(x(i))]`` over the probe words."""
    uniq, mult = np.unique(words, axis=0, return_counts=True)
    total = None
    for w, m in zip(uniq, mult):
        op = m * projectors(w)
        total = op if total is None else total + op
    best, arg = -np.inf, None
    for x in probe_words:
        vals = product_traces(W, x, total)
        k = int(np.argmax(vals))
        if vals.flat[k] > best:
            best = float(vals.flat[k])
            arg = (tuple(int(a) for a in x), tuple(int(s) for s in np.unravel_index(k, vals.shape)))
    return best, arg


def ground_set(W, P_X, n, plan, rng=None, probe="type_class", alpha=None,
               budget=RESAMPLE_BUDGET, projectors=None):
    """Draw ``I`` words uniformly from the type class and certify the overlap bound.

    The set is accepted when ``sum_i tr[rho(x, s) P(x(i))] <= 3 A_n I`` for
    every probed ``(x, s)``.  ``probe`` is ``"type_class"`` (the words a code
    can send) or ``"all"`` (every input word).

    Raises
    ------
    ResampleBudgetExceeded
        After ``budget`` rejected draws; the details carry the best attempt.
    """
    W = check_channel(W)
    rng = np.random.default_rng(rng)
    alpha = plan.alpha if alpha is None else alpha
    counts = nearest_type(P_X, n)
    base = np.asarray(canonical_word(counts / n, n))
    projectors = projectors or _ProjectorCache(W, alpha)
    probes = type_class(counts) if probe == "type_class" else all_words(W.n_inputs, n)
    bound = 3 * plan.A * plan.I_size
    best = None
    for attempt in range(1, budget + 1):
        words = np.stack([rng.permutation(base) for _ in range(plan.I_size)])
        lhs, arg = _ground_lhs(W, words, projectors, probes)
        if lhs <= bound * (1 + 1e-12):
            return GroundSet(words, tuple(int(c) for c in counts), attempt, lhs, bound, arg)
        if best is None or lhs < best:
            best = lhs
    raise ResampleBudgetExceeded(f"no ground set met the overlap bound in {budget} draws",
                                 best_lhs=best, bound=bound, attempts=budget)


# -- codes -------------------------------------------------------------------------


def sqrt_decoder(book, projectors):
    """Square-root measurement for one codebook.

    ``D(j) = T^{-1/2} P(u(j)) T^{-1/2}`` with ``T = sum_j P(u(j))`` inverted on
    its support, plus a failure element ``I - sum_j D(j)``.

    Parameters
    ----------
    book : sequence of words
    projectors : mapping or callable from word to operator (diagonal or dense)
    """
    get = projectors if callable(projectors) else (lambda w: projectors[tuple(w)])
    ops = [np.asarray(get(tuple(int(a) for a in w))) for w in book]
    T = np.sum(ops, axis=0)
    R = _inv_sqrt(T)
    if T.ndim == 1:
        elems = [R * P * R for P in ops]
    else:
        elems = [hermitian_part(R @ P @ R) for P in ops]
    fail = _identity_like(T) - np.sum(elems, axis=0)
    return POVM(tuple(range(len(ops))) + ("fail",), tuple(elems) + (fail,))


class RandomCorrelatedCode:
    """Keyed family of codebooks with square-root decoders.

    Parameters
    ----------
    W : AVCQC
    plan : ParameterPlan
    ground : ndarray, shape (I, n)
        Ground-set words (duplicates allowed; they are distinct indices).
    books : ndarray, shape (K, J)
        ``books[k, j]`` is the ground-set index of message ``j`` under key ``k``.
    scenario : {1, 2}
    """

    def __init__(self, W, plan, ground, books, scenario=1, alpha=0.5, seeds=None,
                 decoders=None):
        self.W = W
        self.plan = plan
        self.ground = np.asarray(ground, dtype=int)
        self.books = np.asarray(books, dtype=int)
        self.scenario = int(scenario)
        self.alpha = float(alpha)
        self.seeds = dict(seeds or {})
        self._projectors = _ProjectorCache(W, alpha)
        self._decoders = decoders
        self._pooled = None

    @property
    def n(self):
        return self.ground.shape[1]

    @property
    def K(self):
        return self.books.shape[0]

    @property
    def J(self):
        return self.books.shape[1]

    @property
    def I(self):
        return self.ground.shape[0]

    @property
    def block_size(self):
        return self.I // self.J

    def block_of(self, index):
        return index // self.block_size

    def word(self, j, k):
        return tuple(int(a) for a in self.ground[self.books[k, j]])

    def codebook(self, k):
        return [self.word(j, k) for j in range(self.J)]

    def words(self):
        """Distinct words used by the code."""
        return sorted({self.word(j, k) for k in range(self.K) for j in range(self.J)})

    def projector(self, word):
        return self._projectors(word)

    def decoder(self, k):
        if self._decoders is not None:
            els = self._decoders[k]
            return POVM(tuple(range(self.J)) + ("fail",), tuple(els))
        return sqrt_decoder(self.codebook(k), self._projectors)

    def pooled(self):
        """Summed decoding operators per word and per (word, message).

        Returns ``(by_word, by_pair)``: ``by_word[x] = (N_x, sum D_k(j))`` over
        all ``(j, k)`` with ``u(j, k) = x`` and ``by_pair[(x, j)]`` the same
        restricted to message ``j``.
        """
        if self._pooled is None:
            by_word, by_pair = {}, {}
            for k in range(self.K):
                povm = self.decoder(k)
                for j in range(self.J):
                    x = self.word(j, k)
                    D = np.asarray(povm.elements[j])
                    c, acc = by_pair.get((x, j), (0, 0))
                    by_pair[(x, j)] = (c + 1, acc + D)
            for (x, j), (c, acc) in sorted(by_pair.items()):
                cw, accw = by_word.get(x, (0, 0))
                by_word[x] = (cw + c, accw + acc)
            self._pooled = (by_word, by_pair)
        return self._pooled

    # -- counting constraints

    def key_sets(self):
        """``|K(i)|`` for every ground-set index."""
        return np.bincount(self.books.ravel(), minlength=self.I)

    def interference_counts(self):
        """``|K_0(i, s)|`` as a dict ``i -> array over S^n``."""
        out = {}
        mu = self.plan.mu
        for k in range(self.K):
            ops = [self._projectors(self.word(j, k)) for j in range(self.J)]
            total = np.sum(ops, axis=0)
            for j in range(self.J):
                i = int(self.books[k, j])
                hit = product_traces(self.W, self.word(j, k), total - ops[j]) > mu
                out[i] = out.get(i, 0) + hit.astype(int)
        return out

    def counting_report(self):
        """Check distinct indices per key and both key-set size conditions."""
        K, J, I = self.K, self.J, self.I
        distinct = all(len(set(row)) == J for row in self.books.tolist())
        ks = self.key_sets()
        k_low = K * J / (2 * I)
        k0 = self.interference_counts()
        k0_high = 9 * J * K * self.plan.lam_prime / (2 * I)
        k0_max = max((int(np.max(v)) for v in k0.values()), default=0)
        frac = max((float(np.max(v)) / ks[i] for i, v in k0.items() if ks[i] > 0), default=0.0)
        rep = {
            "distinct_indices": distinct,
            "min_key_set": int(ks.min()),
            "key_set_bound": k_low,
            "key_sets_ok": bool(ks.min() >= k_low),
            "max_interfered": k0_max,
            "interfered_bound": k0_high,
            "interfered_ok": bool(k0_max <= k0_high),
            "max_interfered_fraction": frac,
        }
        if self.scenario == 2:
            rep["blocks_ok"] = bool(np.all(self.books // self.block_size == np.arange(J)[None, :]))
        rep["ok"] = rep["distinct_indices"] and rep["key_sets_ok"] and rep["interfered_ok"] and \
            rep.get("blocks_ok", True)
        return rep

    def max_miss(self):
        """``max_{u, s} tr[rho(u, s) (I - P(u))]`` over the code's words."""
        worst = 0.0
        for w in self.words():
            vals = product_traces(self.W, w, self._projectors(w))
            worst = max(worst, 1.0 - float(np.min(vals)))
        return worst

    def decomposition_bound(self):
        """Right-hand sides of the error decomposition with measured quantities.

        ``plan_bound = 9 lambda' + 2^{-n eta/2 + 1} + 4 mu`` uses the plan's
        ``lambda'``; ``measured_bound`` replaces ``9 lambda'`` by the largest
        realised fraction ``|K_0(i, s)| / |K(i)|``.  Both hold whenever the
        counting constraints do.
        """
        miss = self.max_miss()
        eta = -2 * math.log2(miss) / self.n if miss > 0 else float("inf")
        rep = self.counting_report()
        tail = 2 * miss
        return {
            "eta_hat": eta,
            "max_miss": miss,
            "lambda_prime": self.plan.lam_prime,
            "mu": self.plan.mu,
            "lambda_prime_hat": rep["max_interfered_fraction"] / 9,
            "plan_bound": 9 * self.plan.lam_prime + tail + 4 * self.plan.mu,
            "measured_bound": rep["max_interfered_fraction"] + tail + 4 * self.plan.mu,
        }

    # -- serialisation

    def to_dict(self, include_decoders=False):
        out = {
            "version": __version__,
            "scenario": self.scenario,
            "alpha": self.alpha,
            "seeds": self.seeds,
            "plan": self.plan.to_dict(),
            "channel": dump_spec(self.W),
            "ground_set": self.ground.tolist(),
            "books": self.books.tolist(),
        }
        if include_decoders:
            out["decoders"] = [[_op_to_json(e) for e in self.decoder(k).elements]
                               for k in range(self.K)]
        return out

    def to_json(self, include_decoders=False):
        return json.dumps(self.to_dict(include_decoders), sort_keys=False)

    @classmethod
    def from_dict(cls, data):
        W = load_spec(data["channel"])
        decoders = None
        if "decoders" in data:
            decoders = [[_op_from_json(e) for e in row] for row in data["decoders"]]
        return cls(W, ParameterPlan.from_dict(data["plan"]), data["ground_set"], data["books"],
                   scenario=data["scenario"], alpha=data["alpha"], seeds=data.get("seeds"),
                   decoders=decoders)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _op_to_json(op):
    op = np.asarray(op)
    if op.ndim == 1:
        return {"diag": np.real(op).tolist()}
    return {"re": op.real.tolist(), "im": op.imag.tolist()}


def _op_from_json(obj):
    if "diag" in obj:
        return np.asarray(obj["diag"], dtype=float)
    return np.asarray(obj["re"]) + 1j * np.asarray(obj["im"])


def _draw_books(rng, I, J, K, scenario):
    if scenario == 1:
        return np.stack([rng.choice(I, size=J, replace=False) for _ in range(K)])
    B = I // J
    return np.arange(J)[None, :] * B + rng.integers(0, B, size=(K, J))


def build_code(W, ground, plan, scenario=1, rng=None, alpha=None, budget=RESAMPLE_BUDGET,
               check=True, seed=None):
    """Draw the codebooks and accept the first realisation meeting the counting constraints.

    Parameters
    ----------
    W : AVCQC
    ground : GroundSet or ndarray of words
    plan : ParameterPlan
    scenario : {1, 2}
    check : bool
        Verify the counting constraints (and redraw on failure).

    Raises
    ------
    PartitionError
        Scenario 2 with ``I`` not divisible by ``J``.
    ResampleBudgetExceeded
    """
    W = check_channel(W)
    words = ground.words if isinstance(ground, GroundSet) else np.asarray(ground, dtype=int)
    I, J, K = words.shape[0], plan.J_size, plan.K_size
    if scenario not in (1, 2):
        raise ValidationError(f"scenario must be 1 or 2, got {scenario}")
    if J > I:
        raise InfeasiblePlan(f"J = {J} messages exceed the ground set of {I} words")
    if scenario == 2 and I % J:
        raise PartitionError(f"ground set size {I} is not divisible by J = {J}")
    alpha = plan.alpha if alpha is None else alpha
    rng = np.random.default_rng(rng)
    last = None
    for attempt in range(1, budget + 1):
        books = _draw_books(rng, I, J, K, scenario)
        code = RandomCorrelatedCode(W, plan, words, books, scenario, alpha,
                                    seeds={"seed": seed, "attempt": attempt})
        if not check:
            return code
        last = code.counting_report()
        if last["ok"]:
            code.seeds["counting"] = last
            return code
    raise ResampleBudgetExceeded(f"no codebook family met the counting constraints in {budget} draws",
                                 last_report=last, attempts=budget)


# -- bound checks ------------------------------------------------------------------


def chernoff_bounds(L, p0, p1, alpha):
    """Tail bounds ``(exp(-alpha^2 L p1 / 8), exp(-3 alpha^2 L p0 / 8))``.

    The first bounds ``Pr{sum > L p1 (1 + alpha)}``, the second
    ``Pr{sum < L p0 (1 - alpha)}`` for i.i.d. Bernoulli(p) with
    ``p0 <= p <= p1``.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 < p0 <= p1 < 1:
        raise DomainError(f"need 0 < p0 <= p1 < 1, got p0={p0}, p1={p1}")
    if L < 1:
        raise DomainError(f"L must be positive, got {L}")
    return math.exp(-alpha ** 2 * L * p1 / 8), math.exp(-3 * alpha ** 2 * L * p0 / 8)


def chernoff_tails(L, p, alpha, trials=100_000, seed=0):
    """Empirical upper and lower tail frequencies of a Binomial(L, p) sum."""
    rng = np.random.default_rng(seed)
    sums = rng.binomial(L, p, size=trials)
    upper = float(np.mean(sums > L * p * (1 + alpha)))
    lower = float(np.mean(sums < L * p * (1 - alpha)))
    return upper, lower


def hayashi_nagaoka_check(S, T, tol=TOL_PSD):
    """Smallest eigenvalue of ``2(I - S) + 4T - [I - (S+T)^{-1/2} S (S+T)^{-1/2}]``.

    Raises
    ------
    PreconditionViolated
        Unless ``0 <= S <= I`` and ``T >= 0`` (within ``tol``).
    """
    S = np.asarray(S, dtype=complex)
    T = np.asarray(T, dtype=complex)
    if S.shape != T.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise PreconditionViolated("S and T must be square matrices of one shape")
    for name, M in (("S", S), ("T", T)):
        if np.max(np.abs(M - M.conj().T)) > TOL_HERM:
            raise PreconditionViolated(f"{name} is not Hermitian")
    ws = np.linalg.eigvalsh(hermitian_part(S))
    if ws[0] < -tol or ws[-1] > 1 + tol:
        raise PreconditionViolated("S must satisfy 0 <= S <= I", eigenvalues=[float(ws[0]), float(ws[-1])])
    if np.linalg.eigvalsh(hermitian_part(T))[0] < -tol:
        raise PreconditionViolated("T must be positive semidefinite")
    I = np.eye(S.shape[0])
    w, v = np.linalg.eigh(hermitian_part(S + T))
    thr = RANK_TOL * max(1.0, float(np.max(np.abs(w))))
    inv = np.where(w > thr, 1 / np.sqrt(np.clip(w, thr, None)), 0.0)
    R = (v * inv) @ v.conj().T
    lhs = I - R @ S @ R
    slack = 2 * (I - S) + 4 * T - lhs
    return float(np.linalg.eigvalsh(hermitian_part(slack))[0])


# -- estimator -----------------------------------------------------------------


class CodeBuilder(BaseEstimator):
    """Build a desk-scale random correlated code with ``fit(W)``.

    Parameters
    ----------
    n : int
        Block length.
    scenario : {1, 2}
    rate : float, optional
        Defaults to half the capacity.
    alpha : float
        Typicality parameter of the universal projectors.
    seed : int

    Attributes
    ----------
    plan_ : ParameterPlan
    ground_ : GroundSet
    code_ : RandomCorrelatedCode
    """

    def __init__(self, n=4, scenario=1, rate=None, alpha=0.5, seed=0):
        self.n = n
        self.scenario = scenario
        self.rate = rate
        self.alpha = alpha
        self.seed = seed

    def fit(self, W, y=None):
        W = check_channel(W)
        seed = check_seed(self.seed)
        g_seed, c_seed = np.random.SeedSequence(seed).spawn(2)
        self.plan_ = desk_plan(W, self.n, rate=self.rate, alpha=self.alpha, scenario=self.scenario)
        P_X = np.asarray(self.plan_.input_type) / self.n
        cache = _ProjectorCache(W, self.alpha)
        self.ground_ = ground_set(W, P_X, self.n, self.plan_, np.random.default_rng(g_seed),
                                  projectors=cache)
        self.ground_.seed = seed
        self.code_ = build_code(W, self.ground_, self.plan_, self.scenario,
                                np.random.default_rng(c_seed), seed=seed)
        self.code_._projectors = cache
        return self

    def score(self, W=None, y=None):
        """Negative exact average error of the fitted code (higher is better)."""
        from .evaluation import error_probability
        return -error_probability(self.code_, "avg", self.scenario)
