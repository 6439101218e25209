"""Classical-quantum channels and arbitrarily varying cq channels (AVCQC).

An :class:`AVCQC` stores its output states as one array of shape
``(n_inputs, n_states, d, d)``; labels are opaque strings and every operation
works on the dense integer indices assigned at construction.  Conditional
distributions ``Q(s|x)`` are row-stochastic arrays of shape
``(n_inputs, n_states)``.
"""

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    AlphabetMismatch,
    DimensionOverflow,
    IncompleteIndex,
    LengthMismatch,
    NotDensity,
    NotDistribution,
    NotStochastic,
    SchemaError,
    ValidationError,
)
from .operators import (
    TOL_TR,
    _frozen,
    complex_from_json,
    complex_to_json,
    dim_cap,
    is_diagonal,
    make_density,
    make_distribution,
    tensor_all,
)

SPEC_KEYS = {"input_alphabet", "state_alphabet", "dim", "states"}
CLASSICAL_KEYS = {"classical", "matrices", "input_alphabet"}


@dataclass(frozen=True)
class CQChannel:
    """Map ``x -> rho_x``; ``states`` has shape ``(n_inputs, d, d)``."""

    input_alphabet: tuple
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=complex)
        if states.ndim != 3 or states.shape[1] != states.shape[2]:
            raise ValidationError(f"states must have shape (n, d, d), got {states.shape}")
        if len(self.input_alphabet) != states.shape[0]:
            raise AlphabetMismatch("input alphabet and state list differ in length")
        object.__setattr__(self, "input_alphabet", tuple(str(x) for x in self.input_alphabet))
        object.__setattr__(self, "states", _frozen(states))

    @property
    def n_inputs(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]

    def __getitem__(self, x):
        if isinstance(x, str):
            x = self.input_alphabet.index(x)
        return self.states[x]


@dataclass(frozen=True)
class AVCQC:
    """Arbitrarily varying cq channel ``(x, s) -> rho(x, s)``."""

    input_alphabet: tuple
    state_alphabet: tuple
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=complex)
        if states.ndim != 4 or states.shape[2] != states.shape[3]:
            raise ValidationError(f"states must have shape (nx, ns, d, d), got {states.shape}")
        if (len(self.input_alphabet), len(self.state_alphabet)) != states.shape[:2]:
            raise AlphabetMismatch("alphabet sizes do not match the state array")
        object.__setattr__(self, "input_alphabet", tuple(str(x) for x in self.input_alphabet))
        object.__setattr__(self, "state_alphabet", tuple(str(s) for s in self.state_alphabet))
        object.__setattr__(self, "states", _frozen(states))
        diag = all(is_diagonal(states[x, s], atol=1e-14)
                   for x in range(states.shape[0]) for s in range(states.shape[1]))
        object.__setattr__(self, "_classical", diag)

    @property
    def n_inputs(self):
        return self.states.shape[0]

    @property
    def n_states(self):
        return self.states.shape[1]

    @property
    def dim(self):
        return self.states.shape[2]

    @property
    def is_classical(self):
        """True when every output state is diagonal (all outputs commute)."""
        return self._classical

    def state(self, x, s):
        if isinstance(x, str):
            x = self.input_alphabet.index(x)
        if isinstance(s, str):
            s = self.state_alphabet.index(s)
        return self.states[x, s]

    def diagonals(self):
        """Real diagonals of all outputs, shape ``(nx, ns, d)``."""
        return np.real(np.einsum("xsii->xsi", self.states))

    def channel(self, s):
        """The cq channel obtained by fixing the state ``s``."""
        if isinstance(s, str):
            s = self.state_alphabet.index(s)
        return CQChannel(self.input_alphabet, self.states[:, s])

    def encode_word(self, word, alphabet="input"):
        """Translate a word of labels (or indices) into a tuple of indices."""
        labels = self.input_alphabet if alphabet == "input" else self.state_alphabet
        out = []
        for a in word:
            if isinstance(a, str):
                if a not in labels:
                    raise AlphabetMismatch(f"unknown symbol {a!r}")
                out.append(labels.index(a))
            else:
                a = int(a)
                if not 0 <= a < len(labels):
                    raise AlphabetMismatch(f"symbol index {a} out of range")
                out.append(a)
        return tuple(out)


def make_conditional(rows, n_inputs=None, n_states=None, tol=TOL_TR):
    """Validate a conditional distribution ``Q(s|x)`` (one simplex row per x)."""
    q = np.asarray(rows, dtype=float)
    if q.ndim != 2:
        raise NotDistribution(f"conditional distribution must be 2-D, got shape {q.shape}")
    if n_inputs is not None and q.shape[0] != n_inputs:
        raise AlphabetMismatch(f"expected {n_inputs} rows, got {q.shape[0]}")
    if n_states is not None and q.shape[1] != n_states:
        raise AlphabetMismatch(f"expected {n_states} columns, got {q.shape[1]}")
    return _frozen(np.stack([make_distribution(r, tol=tol) for r in q]))


# -- construction ---------------------------------------------------------------


def classical_embed(matrices, input_alphabet=None, state_alphabet=None, tol=1e-9):
    """Embed a classical AVC as an AVCQC with diagonal output states.

    ``matrices`` maps each channel state to a row-stochastic matrix ``T_s``
    with ``T_s[x, y] = W(y|x, s)``; a sequence is accepted as well.
    """
    if isinstance(matrices, dict):
        state_alphabet = tuple(matrices) if state_alphabet is None else state_alphabet
        mats = [np.asarray(matrices[s], dtype=float) for s in matrices]
    else:
        mats = [np.asarray(m, dtype=float) for m in matrices]
        if state_alphabet is None:
            state_alphabet = tuple(f"s{i}" for i in range(len(mats)))
    shapes = {m.shape for m in mats}
    if len(shapes) != 1 or mats[0].ndim != 2:
        raise NotStochastic("transmission matrices must share one 2-D shape")
    nx, ny = mats[0].shape
    for s, m in zip(state_alphabet, mats):
        if m.min() < -tol or np.max(np.abs(m.sum(axis=1) - 1.0)) > tol:
            raise NotStochastic(f"matrix for state {s!r} is not row-stochastic", state=str(s))
    if input_alphabet is None:
        input_alphabet = tuple(str(x) for x in range(nx))
    states = np.zeros((nx, len(mats), ny, ny), dtype=complex)
    for si, m in enumerate(mats):
        m = np.clip(m, 0.0, None)
        m = m / m.sum(axis=1, keepdims=True)
        for x in range(nx):
            states[x, si] = np.diag(m[x])
    return AVCQC(tuple(input_alphabet), tuple(state_alphabet), states)


def _as_spec_dict(data):
    if isinstance(data, dict):
        return data
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except (TypeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"channel spec is not valid JSON: {exc}",
                          violations=[{"kind": "json", "reason": str(exc)}]) from exc
    if not isinstance(obj, dict):
        raise SchemaError("channel spec must be a JSON object",
                          violations=[{"kind": "schema", "reason": "top level is not an object"}])
    return obj


def _load_classical(obj):
    violations = []
    unknown = set(obj) - CLASSICAL_KEYS
    if unknown:
        violations.append({"kind": "schema", "reason": f"unknown keys {sorted(unknown)}"})
    mats = obj.get("matrices")
    if not isinstance(mats, dict) or not mats:
        violations.append({"kind": "schema", "reason": "'matrices' must be a non-empty object"})
        raise SchemaError("invalid classical channel spec", violations=violations)
    if violations:
        raise SchemaError("invalid classical channel spec", violations=violations)
    try:
        return classical_embed({str(k): v for k, v in mats.items()},
                               input_alphabet=obj.get("input_alphabet"))
    except (NotStochastic, ValueError) as exc:
        raise NotDensity(str(exc), violations=[{"kind": "density", "reason": str(exc)}]) from exc


def load_spec(data):
    """Parse a channel spec (JSON text, bytes or dict) into an :class:`AVCQC`.

    Every violation is collected before raising, so a single error reports
    all problems in ``exc.violations``.

    Raises
    ------
    SchemaError, NotDensity, IncompleteIndex
    """
    obj = _as_spec_dict(data)
    if obj.get("classical"):
        return _load_classical(obj)
    violations = []
    unknown = set(obj) - SPEC_KEYS
    if unknown:
        violations.append({"kind": "schema", "reason": f"unknown keys {sorted(unknown)}"})
    missing = SPEC_KEYS - set(obj)
    if missing:
        violations.append({"kind": "schema", "reason": f"missing keys {sorted(missing)}"})
    if violations:
        raise SchemaError("invalid channel spec", violations=violations)

    xs = [str(x) for x in obj["input_alphabet"]]
    ss = [str(s) for s in obj["state_alphabet"]]
    d = obj["dim"]
    if not isinstance(d, int) or d < 1:
        violations.append({"kind": "schema", "reason": "'dim' must be a positive integer"})
    if not xs or not ss or len(set(xs)) != len(xs) or len(set(ss)) != len(ss):
        violations.append({"kind": "schema", "reason": "alphabets must be non-empty and distinct"})
    if not isinstance(obj["states"], dict):
        violations.append({"kind": "schema", "reason": "'states' must be an object"})
    if violations:
        raise SchemaError("invalid channel spec", violations=violations)

    expected = {f"{x}|{s}": (i, j) for i, x in enumerate(xs) for j, s in enumerate(ss)}
    for key in obj["states"]:
        if key not in expected:
            violations.append({"kind": "schema", "key": key, "reason": "unknown state key"})
    states = np.zeros((len(xs), len(ss), d, d), dtype=complex)
    for key, (i, j) in expected.items():
        if key not in obj["states"]:
            violations.append({"kind": "incomplete", "key": key, "reason": "missing state"})
            continue
        try:
            a = complex_from_json(obj["states"][key])
        except (ValidationError, ValueError, TypeError) as exc:
            violations.append({"kind": "schema", "key": key, "reason": str(exc)})
            continue
        if a.shape != (d, d):
            violations.append({"kind": "schema", "key": key,
                               "reason": f"shape {a.shape} is not ({d}, {d})"})
            continue
        try:
            states[i, j] = make_density(a)
        except ValidationError as exc:
            violations.append({"kind": "density", "key": key, "x": xs[i], "s": ss[j],
                               "reason": f"{type(exc).__name__}: {exc}"})
    if violations:
        kinds = [v["kind"] for v in violations]
        cls = SchemaError if "schema" in kinds else (
            NotDensity if "density" in kinds else IncompleteIndex)
        raise cls(f"{len(violations)} violation(s) in channel spec", violations=violations)
    return AVCQC(tuple(xs), tuple(ss), states)


def dump_spec(W):
    """Serialise an AVCQC to the JSON-ready spec dict."""
    return {
        "input_alphabet": list(W.input_alphabet),
        "state_alphabet": list(W.state_alphabet),
        "dim": int(W.dim),
        "states": {f"{x}|{s}": complex_to_json(W.states[i, j])
                   for i, x in enumerate(W.input_alphabet)
                   for j, s in enumerate(W.state_alphabet)},
    }


# -- channel uses -----------------------------------------------------------------


def output_state(W, x_seq, s_seq, cap=None):
    """Output ``rho(x_1, s_1) (x) ... (x) rho(x_n, s_n)`` as a dense matrix."""
    x_seq = W.encode_word(x_seq)
    s_seq = W.encode_word(s_seq, alphabet="state")
    if len(x_seq) != len(s_seq):
        raise LengthMismatch(f"input word has length {len(x_seq)}, state word {len(s_seq)}")
    cap = dim_cap() if cap is None else cap
    if W.dim ** len(x_seq) > cap:
        raise DimensionOverflow(f"output dimension {W.dim}^{len(x_seq)} exceeds {cap}")
    return tensor_all([W.states[x, s] for x, s in zip(x_seq, s_seq)], cap=cap)


def double_bar(W, Q):
    """Jammer-averaged channel ``x -> sum_s Q(s|x) rho(x, s)``."""
    Q = make_conditional(Q, W.n_inputs, W.n_states)
    return CQChannel(W.input_alphabet, np.einsum("xs,xsij->xij", Q, W.states))


def bar(W, p_s):
    """Input-independent average ``x -> sum_s P(s) rho(x, s)``."""
    p_s = np.asarray(p_s, dtype=float)
    if p_s.shape != (W.n_states,):
        raise AlphabetMismatch(f"state distribution has shape {p_s.shape}")
    p_s = make_distribution(p_s)
    return CQChannel(W.input_alphabet, np.einsum("s,xsij->xij", p_s, W.states))


def product_traces(W, x_word, op):
    """``tr[rho(x, s) op]`` for every state sequence ``s`` at once.

    Parameters
    ----------
    x_word : sequence of input indices, length n
    op : ndarray
        Operator on ``H^{(x) n}``, either dense ``(d^n, d^n)`` or diagonal
        ``(d^n,)``.

    Returns
    -------
    ndarray of shape ``(n_states,) * n``; entry ``[s_1, ..., s_n]`` is the
    trace for that state sequence.
    """
    x_word = tuple(int(x) for x in x_word)
    n, d = len(x_word), W.dim
    op = np.asarray(op)
    if op.shape[0] != d ** n:
        raise LengthMismatch(f"operator dimension {op.shape[0]} is not {d}^{n}")
    if op.ndim == 1 or W.is_classical:
        diag = op if op.ndim == 1 else np.diagonal(op)
        t = np.real(np.asarray(diag)).reshape((d,) * n) if n else np.real(diag).reshape(())
        diags = W.diagonals()
        for x in x_word:
            # contract the leading output axis, append the state axis
            t = np.tensordot(t, diags[x], axes=([0], [1]))
        return np.asarray(t, dtype=float)
    t = op.reshape((d,) * (2 * n))
    m = n
    for x in x_word:
        # tr[A B] = sum_ab A[b, a] B[a, b]: op row index a meets rho column index
        t = np.tensordot(t, W.states[x], axes=([0, m], [2, 1]))
        m -= 1
    return np.real(t)
