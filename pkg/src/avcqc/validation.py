"""Input validation helpers shared by the solvers and estimators."""

import numpy as np

from .channels import AVCQC, load_spec, make_conditional
from .exceptions import AlphabetMismatch, ValidationError
from .operators import make_distribution


def check_channel(W):
    """Return ``W`` as an :class:`AVCQC`; spec dicts and JSON text are parsed."""
    if isinstance(W, AVCQC):
        return W
    if isinstance(W, (dict, str, bytes, bytearray)):
        return load_spec(W)
    raise ValidationError(f"expected an AVCQC or a channel spec, got {type(W).__name__}")


def check_distribution(P, size=None):
    """Validate a probability vector, optionally of a given length."""
    P = np.asarray(P, dtype=float)
    if size is not None and P.shape != (size,):
        raise AlphabetMismatch(f"distribution has shape {P.shape}, expected ({size},)")
    return make_distribution(P)


def check_conditional(Q, W):
    """Validate ``Q(s|x)`` against the alphabets of ``W``."""
    return make_conditional(Q, W.n_inputs, W.n_states)


def check_word(word, alphabet_size, n=None):
    """Validate an input word given as integer indices."""
    word = tuple(int(a) for a in word)
    if n is not None and len(word) != n:
        raise ValidationError(f"word has length {len(word)}, expected {n}")
    if any(a < 0 or a >= alphabet_size for a in word):
        raise AlphabetMismatch(f"word {word} uses symbols outside 0..{alphabet_size - 1}")
    return word


def check_seed(seed):
    if seed is None:
        return 0
    seed = int(seed)
    if seed < 0 or seed >= 2 ** 64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    return seed
