import math

import numpy as np

from avcqc.channels import AVCQC
from avcqc.codes import ParameterPlan, RandomCorrelatedCode, build_code, ground_set


def fixed_code(W, words, books, decoders):
    """Code with hand-written decoders; ``words`` is the ground set."""
    words = np.asarray(words, dtype=int)
    books = np.asarray(books, dtype=int)
    plan = ParameterPlan.manual(words.shape[1], words.shape[0], books.shape[1], books.shape[0],
                                W.n_inputs, W.n_states)
    return RandomCorrelatedCode(W, plan, words, books, decoders=decoders)


def example1_code(W, scenario=1, J=2, n=4, seed=0, I=8):
    K = int(math.ceil(32 / 3 * math.log(2 * I) * I / J))
    plan = ParameterPlan.manual(n, I, J, K, W.n_inputs, W.n_states, log2_A=0.0, mu=0.5)
    P = np.zeros(W.n_inputs)
    P[:2] = 0.5
    g = ground_set(W, P, n, plan, rng=seed)
    return build_code(W, g, plan, scenario, rng=seed)


def trivial_channel(n_states=1):
    return AVCQC(("0",), tuple(f"s{i}" for i in range(n_states)), np.ones((1, n_states, 1, 1)))
