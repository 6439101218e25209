"""Holevo quantity and channel conditional entropy."""

from dataclasses import dataclass

import numpy as np

from .channels import CQChannel
from .exceptions import AlphabetMismatch
from .operators import make_distribution, relative_entropy, von_neumann_entropy


@dataclass(frozen=True)
class ChiValue:
    """Holevo quantity with both entropy terms kept for reuse."""

    value: float
    ensemble_entropy: float
    mean_state_entropy: float

    def __float__(self):
        return self.value


def _states(V):
    return V.states if isinstance(V, CQChannel) else np.asarray(V)


def _check(P, states):
    P = make_distribution(P)
    if P.shape[0] != states.shape[0]:
        raise AlphabetMismatch(
            f"distribution over {P.shape[0]} symbols, channel has {states.shape[0]} inputs")
    return P


def channel_conditional_entropy(P, V):
    """``S(V|P) = sum_x P(x) S(V(x))`` in bits."""
    states = _states(V)
    P = _check(P, states)
    return float(sum(p * von_neumann_entropy(rho) for p, rho in zip(P, states) if p > 0))


def holevo_chi(P, V):
    """``chi(P; V) = S(sum_x P(x) V(x)) - sum_x P(x) S(V(x))``."""
    states = _states(V)
    P = _check(P, states)
    avg = np.einsum("x,xij->ij", P, states)
    ens = von_neumann_entropy(avg)
    mean = channel_conditional_entropy(P, states)
    return ChiValue(value=ens - mean, ensemble_entropy=ens, mean_state_entropy=mean)


def divergence_vector(P, V):
    """``D(V(x) || sum_x' P(x') V(x'))`` for every input ``x``.

    Its ``P``-average equals ``chi(P; V)``.
    """
    states = _states(V)
    P = _check(P, states)
    avg = np.einsum("x,xij->ij", P, states)
    return np.array([relative_entropy(rho, avg) for rho in states])
