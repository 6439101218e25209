"""Built-in example channels."""

import numpy as np

from .channels import AVCQC, classical_embed
from .operators import random_density

LOG2_5_2 = float(np.log2(2.5))


def example1():
    """Binary AVC whose input-aware jammer can make both outputs uniform.

    The averaged rows coincide under ``Q(s0|0) = 1/2, Q(s0|1) = 1``, hence
    the capacity is 0.
    """
    T0 = [[3 / 4, 1 / 4], [1 / 2, 1 / 2]]
    T1 = [[1 / 4, 3 / 4], [0.0, 1.0]]
    return classical_embed({"s0": T0, "s1": T1}, input_alphabet=("0", "1"))


EXAMPLE1_JAMMER = np.array([[0.5, 0.5], [1.0, 0.0]])


def example2():
    """Four inputs ``a, 0, 1, 2``; ``s1`` keeps ``a`` and cycles ``0 -> 1 -> 2 -> 0``.

    At ``P = (2/5, 1/5, 1/5, 1/5)`` the worst jammer leaves ``log2(5/2)`` bits.
    """
    T0 = np.eye(4)
    T1 = np.array([[1, 0, 0, 0],
                   [0, 0, 1, 0],
                   [0, 0, 0, 1],
                   [0, 1, 0, 0]], dtype=float)
    return classical_embed({"s0": T0, "s1": T1}, input_alphabet=("a", "0", "1", "2"))


EXAMPLE2_INPUT = np.array([2 / 5, 1 / 5, 1 / 5, 1 / 5])

def random_avcqc(n_inputs, n_states, dim, rng=None, classical=False):
    """Seeded random AVCQC; ``classical`` draws Dirichlet rows instead of density matrices."""
    rng = np.random.default_rng(rng)
    xs = tuple(str(i) for i in range(n_inputs))
    ss = tuple(f"s{i}" for i in range(n_states))
    if classical:
        mats = {s: rng.dirichlet(np.ones(dim), size=n_inputs) for s in ss}
        return classical_embed(mats, input_alphabet=xs, state_alphabet=ss)
    states = np.array([[random_density(dim, rng) for _ in ss] for _ in xs])
    return AVCQC(xs, ss, states)


CATALOG = {"example1": example1, "example2": example2}


def get(name):
    return CATALOG[name]()
