"""Finite-dimensional Hermitian operator arithmetic and entropies.

Density operators are plain ``numpy`` arrays of shape ``(d, d)``; probability
vectors are 1-D float arrays.  The ``make_*`` constructors validate inputs and
return read-only arrays, so values stay immutable after construction.

Operators that are diagonal in the computational basis (projectors and
decoders of classical channels) may be stored as 1-D arrays holding their
diagonal; :func:`as_dense` converts when a full matrix is needed.

All logarithms are base 2.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatch,
    DimensionOverflow,
    NotDistribution,
    NotHermitian,
    NotPSD,
    TraceNotOne,
    ValidationError,
)

TOL_HERM = 1e-9
TOL_PSD = 1e-9
TOL_TR = 1e-9
TOL_POVM = 1e-8
DEFAULT_DIM_CAP = 4096
# eigenvalues closer than this are treated as one degenerate eigenspace
DEGENERACY_TOL = 1e-12


def dim_cap():
    """Largest Hilbert-space dimension the library will materialise."""
    value = os.environ.get("AVCQC_BUDGET_DIM")
    return int(value) if value else DEFAULT_DIM_CAP


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def is_diagonal(a, atol=0.0):
    a = np.asarray(a)
    if a.ndim == 1:
        return True
    off = a - np.diag(np.diag(a))
    return bool(np.all(np.abs(off) <= atol))


def as_dense(op):
    """Return the full matrix of an operator given densely or by its diagonal."""
    op = np.asarray(op)
    if op.ndim == 1:
        return np.diag(op)
    return op


def hermitian_part(a):
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + a.conj().T)


def make_hermitian(entries, tol=TOL_HERM):
    a = np.asarray(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    residual = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if residual > tol:
        raise NotHermitian(f"hermiticity residual {residual:.3g} exceeds {tol:g}",
                           residual=residual)
    return _frozen(hermitian_part(a))


def make_density(entries, tol_psd=TOL_PSD, tol_tr=TOL_TR, tol_herm=TOL_HERM):
    """Validate ``entries`` as a density operator.

    Eigenvalues in ``[-tol_psd, 0)`` are clipped to zero and the trace is
    renormalised; anything outside the tolerances is rejected.

    Raises
    ------
    NotHermitian, NotPSD, TraceNotOne
    """
    a = np.array(make_hermitian(entries, tol=tol_herm))
    tr = float(np.real(np.trace(a)))
    if abs(tr - 1.0) > tol_tr:
        raise TraceNotOne(f"trace {tr:.12g} differs from 1", trace=tr)
    if is_diagonal(a):
        diag = np.real(np.diag(a)).copy()
        lo = float(diag.min())
        if lo < -tol_psd:
            raise NotPSD(f"smallest eigenvalue {lo:.3g} is negative", min_eigenvalue=lo)
        diag = np.clip(diag, 0.0, None)
        return _frozen(np.diag(diag / diag.sum()).astype(complex))
    w, v = np.linalg.eigh(a)
    if w[0] < -tol_psd:
        raise NotPSD(f"smallest eigenvalue {w[0]:.3g} is negative", min_eigenvalue=float(w[0]))
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        a = (v * w) @ v.conj().T
    return _frozen(a / np.real(np.trace(a)))


def make_distribution(weights, tol=TOL_TR):
    """Validate a probability vector; tiny negative entries are clipped."""
    p = np.asarray(weights, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise NotDistribution(f"expected a non-empty 1-D vector, got shape {p.shape}")
    if np.any(~np.isfinite(p)) or p.min() < -tol:
        raise NotDistribution("probabilities must be finite and non-negative")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise NotDistribution(f"probabilities sum to {total:.12g}, not 1")
    p = np.clip(p, 0.0, None)
    return _frozen(p / p.sum())


def maximally_mixed(d):
    return _frozen(np.eye(d, dtype=complex) / d)


def pure_state(psi):
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return _frozen(np.outer(psi, psi.conj()))


def random_density(d, rng, rank=None):
    """Random density matrix from a complex Ginibre ensemble."""
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return make_density(rho / np.real(np.trace(rho)))


def random_unitary(d, rng):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


# -- spectra ---------------------------------------------------------------


def _entropy_of_spectrum(w):
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w))) if w.size else 0.0


def eigvalsh_clipped(rho):
    rho = np.asarray(rho)
    if rho.ndim == 1:
        w = np.real(rho).astype(float)
    elif is_diagonal(rho):
        w = np.real(np.diag(rho)).astype(float)
    else:
        w = np.linalg.eigvalsh(rho)
    return np.clip(w, 0.0, None)


def von_neumann_entropy(rho):
    """Entropy ``-tr rho log2 rho`` in bits, with ``0 log 0 = 0``."""
    return _entropy_of_spectrum(eigvalsh_clipped(rho))


def shannon_entropy(p):
    return _entropy_of_spectrum(np.asarray(p, dtype=float))


def canonical_eigh(rho, degeneracy_tol=DEGENERACY_TOL):
    """Eigendecomposition with a reproducible basis.

    Eigenvalues are sorted in descending order.  Inside a degenerate
    eigenspace the basis is obtained by Gram-Schmidt on the projections of the
    standard basis vectors, so the result does not depend on the eigensolver.
    Each eigenvector is phase-fixed so its first non-negligible component is
    real and positive.  Diagonal inputs return the standard basis.

    Returns
    -------
    w : ndarray, shape (d,)
    u : ndarray, shape (d, d)
        Column ``u[:, k]`` is the eigenvector of ``w[k]``.
    """
    rho = np.asarray(rho)
    d = rho.shape[0]
    if is_diagonal(rho):
        w = np.real(np.diag(rho)).astype(float)
        order = np.argsort(-w, kind="stable")
        return w[order], np.eye(d, dtype=complex)[:, order]
    w, v = np.linalg.eigh(hermitian_part(rho))
    w, v = w[::-1], v[:, ::-1]
    cols = []
    k = 0
    while k < d:
        m = k + 1
        while m < d and abs(w[m] - w[k]) <= degeneracy_tol:
            m += 1
        block = v[:, k:m]
        if m - k == 1:
            cols.append(block[:, 0])
        else:
            proj = block @ block.conj().T
            basis = []
            for e in np.eye(d, dtype=complex):
                vec = proj @ e
                for b in basis:
                    vec = vec - (b.conj() @ vec) * b
                norm = np.linalg.norm(vec)
                if norm > 1e-8:
                    basis.append(vec / norm)
                if len(basis) == m - k:
                    break
            cols.extend(basis)
        k = m
    u = np.column_stack(cols)
    for j in range(d):
        col = u[:, j]
        idx = int(np.argmax(np.abs(col) > 1e-10))
        u[:, j] = col * (abs(col[idx]) / col[idx])
    return w, u


def log2_psd(rho, floor):
    """Matrix base-2 logarithm with eigenvalues floored at ``floor``."""
    w, v = np.linalg.eigh(rho)
    return (v * np.log2(np.maximum(w, floor))) @ v.conj().T


def relative_entropy(rho, sigma, support_tol=1e-12):
    """Quantum relative entropy ``D(rho || sigma)`` in bits.

    Returns ``inf`` when the support of ``rho`` is not contained in the support
    of ``sigma``.
    """
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    wr, vr = np.linalg.eigh(hermitian_part(rho))
    ws, vs = np.linalg.eigh(hermitian_part(sigma))
    wr = np.clip(wr, 0.0, None)
    # overlaps |<r_i|s_j>|^2
    ov = np.abs(vr.conj().T @ vs) ** 2
    mass = wr[:, None] * ov
    outside = ws <= support_tol
    if np.any(mass[:, outside] > support_tol):
        return float("inf")
    pos_r = wr > 0
    term1 = float(np.sum(wr[pos_r] * np.log2(wr[pos_r])))
    term2 = float(np.sum(mass[:, ~outside] * np.log2(ws[~outside])[None, :]))
    return term1 - term2


# -- composition -------------------------------------------------------------


def tensor(a, b, cap=None):
    """Kronecker product of two operators (dense or diagonal)."""
    cap = dim_cap() if cap is None else cap
    a = np.asarray(a)
    b = np.asarray(b)
    da, db = a.shape[0], b.shape[0]
    if da * db > cap:
        raise DimensionOverflow(f"tensor dimension {da * db} exceeds cap {cap}",
                                dim=da * db, cap=cap)
    if a.ndim == 1 and b.ndim == 1:
        return _frozen(np.kron(a, b))
    return _frozen(np.kron(as_dense(a), as_dense(b)))


def tensor_all(ops, cap=None):
    out = np.ones(1) if all(np.asarray(o).ndim == 1 for o in ops) else np.ones((1, 1))
    for op in ops:
        out = tensor(out, op, cap=cap)
    return out


_SUBSYSTEM = {"P": 0, "Q": 1, 0: 0, 1: 1}


def partial_trace(rho, dims, over):
    """Trace out subsystem ``over`` (``"P"``/``0`` or ``"Q"``/``1``).

    ``dims`` is ``(d_P, d_Q)`` and ``rho`` acts on ``H_P (x) H_Q``.
    """
    rho = np.asarray(rho)
    dp, dq = dims
    if rho.shape != (dp * dq, dp * dq):
        raise DimensionMismatch(f"state of shape {rho.shape} does not factor as {dims}")
    if over not in _SUBSYSTEM:
        raise DimensionMismatch(f"unknown subsystem {over!r}")
    t = rho.reshape(dp, dq, dp, dq)
    if _SUBSYSTEM[over] == 0:
        return _frozen(np.einsum("ijil->jl", t))
    return _frozen(np.einsum("ijkj->ik", t))


def conditional_entropy(rho, dims):
    """``S(P|Q) = S(PQ) - S(Q)`` in bits (may be negative)."""
    return von_neumann_entropy(rho) - von_neumann_entropy(partial_trace(rho, dims, "P"))


# -- measurements --------------------------------------------------------------


@dataclass(frozen=True)
class POVM:
    """Measurement with labelled outcomes; elements may be dense or diagonal."""

    outcomes: tuple
    elements: tuple

    def __post_init__(self):
        if len(self.outcomes) != len(self.elements):
            raise ValidationError("outcome labels and elements differ in length")
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "elements", tuple(_frozen(e) for e in self.elements))

    @property
    def dim(self):
        return int(np.asarray(self.elements[0]).shape[0])

    def element(self, outcome):
        return self.elements[self.outcomes.index(outcome)]


@dataclass(frozen=True)
class POVMReport:
    valid: bool
    completeness_residual: float
    psd_violations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "valid": self.valid,
            "completeness_residual": self.completeness_residual,
            "psd_violations": [[str(o), float(e)] for o, e in self.psd_violations],
        }


def povm_validate(povm, tol_psd=TOL_PSD, tol_povm=TOL_POVM):
    """Check positivity of every element and completeness ``sum = I``.

    The completeness residual is the operator norm of ``sum_i E_i - I``.
    """
    elements = [np.asarray(e) for e in povm.elements]
    if all(e.ndim == 1 for e in elements):
        mins = [float(np.min(np.real(e))) for e in elements]
        total = np.sum(elements, axis=0)
        residual = float(np.max(np.abs(total - 1.0)))
    else:
        dense = [as_dense(e) for e in elements]
        mins = [float(np.linalg.eigvalsh(hermitian_part(e))[0]) for e in dense]
        total = np.sum(dense, axis=0)
        residual = float(np.linalg.norm(total - np.eye(total.shape[0]), ord=2))
    violations = [(o, m) for o, m in zip(povm.outcomes, mins) if m < -tol_psd]
    return POVMReport(valid=not violations and residual <= tol_povm,
                      completeness_residual=residual, psd_violations=violations)


# -- serialisation -------------------------------------------------------------


def complex_to_json(a):
    """Nested lists with every complex entry written as ``[re, im]``."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def complex_from_json(data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise ValidationError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]
