import itertools

import numpy as np
import pytest

from avcqc import catalog
from avcqc.adversary import JammerPolicy, best_state, mixed_value, product_strategy
from avcqc.channels import AVCQC, output_state
from avcqc.exceptions import ValidationError, WordNotInCode

from helpers import example1_code, fixed_code


@pytest.fixture(scope="module")
def code4():
    return example1_code(catalog.example1(), n=4, seed=2)


def _brute(code, x, scenario, j=None):
    # exhaustive conditional error from the full output states
    by_word, by_pair = code.pooled()
    count, D = by_pair[(x, j)] if scenario == 2 else by_word[x]
    vals = {}
    for s in itertools.product(range(code.W.n_states), repeat=code.n):
        rho = output_state(code.W, x, s)
        Dm = np.diag(D) if D.ndim == 1 else D
        vals[s] = 1 - np.real(np.trace(rho @ Dm)) / count
    best = max(vals.values())
    return best, vals


def test_single_state_unique_sequence():
    W = AVCQC(("0", "1"), ("s",), np.stack([np.diag([1.0, 0]), np.diag([0.0, 1])])[:, None])
    code = fixed_code(W, [[0], [1]], [[0, 1]], [[np.array([1.0, 0]), np.array([0.0, 1]),
                                                 np.zeros(2)]])
    assert best_state(code, (0,)) == ((0,), 0.0)


def test_example1_n1_projective(ex1):
    code = fixed_code(ex1, [[0], [1]], [[0, 1]],
                      [[np.array([1.0, 0]), np.array([0.0, 1]), np.zeros(2)]])
    # input 0: state s0 keeps (3/4, 1/4) and s1 gives (1/4, 3/4)
    assert best_state(code, (0,)) == ((1,), 0.75)
    # input 1: s0 gives (1/2, 1/2) and s1 gives (0, 1)
    assert best_state(code, (1,)) == ((0,), 0.5)


def test_exhaustive_matches_brute_force(code4):
    for x in code4.words()[:4]:
        s, v = best_state(code4, x)
        best, vals = _brute(code4, x, 1)
        assert np.isclose(v, best) and np.isclose(vals[s], best)


def test_greedy_agrees_with_exhaustive(code4):
    for x in code4.words():
        for j in range(code4.J):
            if (x, j) not in code4.pooled()[1]:
                continue
            assert np.isclose(best_state(code4, x, 2, j, mode="greedy")[1],
                              best_state(code4, x, 2, j)[1])
        assert np.isclose(best_state(code4, x, mode="greedy")[1], best_state(code4, x)[1])


def test_more_information_helps_jammer(code4):
    by_word, by_pair = code4.pooled()
    for x in code4.words():
        s1, v1 = best_state(code4, x, 1)
        total = 0.0
        for j in range(code4.J):
            if (x, j) not in by_pair:
                continue
            _, v2 = best_state(code4, x, 2, j)
            # scenario-1's reply evaluated against message j
            point = np.zeros((2,) * code4.n)
            point[s1] = 1
            assert v2 >= mixed_value(code4, {(x, j): point}, scenario=2, word=x, j=j) - 1e-12
            total += by_pair[(x, j)][0] * v2
        assert total / by_word[x][0] >= v1 - 1e-12


def test_mixed_point_mass_equals_deterministic(code4):
    x = code4.words()[0]
    s, v = best_state(code4, x)
    point = np.zeros((2,) * code4.n)
    point[s] = 1
    assert mixed_value(code4, {x: point}, word=x) == pytest.approx(v, abs=1e-15)


def test_uniform_mixing_is_dominated(code4):
    uniform = np.full((2,) * code4.n, 0.5 ** code4.n)
    strict = 0
    for x in code4.words():
        v_mix = mixed_value(code4, lambda key: uniform, word=x)
        v_det = best_state(code4, x)[1]
        assert v_mix <= v_det + 1e-12
        strict += v_mix < v_det - 1e-9
    assert strict > 0


def test_paper_jammer_dominated(code4):
    from avcqc.evaluation import error_probability
    v = mixed_value(code4, catalog.EXAMPLE1_JAMMER)
    assert v <= error_probability(code4, "avg", 1) + 1e-12


def test_product_strategy():
    q = product_strategy([[0.5, 0.5], [1.0, 0.0]], (0, 1))
    assert np.allclose(q, [[0.5, 0], [0.5, 0]])


def test_word_not_in_code(code4):
    missing = next(w for w in itertools.product(range(2), repeat=4) if w not in code4.words())
    with pytest.raises(WordNotInCode):
        best_state(code4, missing)
    with pytest.raises(ValidationError):
        best_state(code4, code4.words()[0], scenario=2)


def test_policy_validation():
    JammerPolicy(1, "deterministic", {(0,): (1,)})
    with pytest.raises(ValidationError):
        JammerPolicy(1, "mixed", {(0,): [0.7, 0.7]})
