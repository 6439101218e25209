import numpy as np
import pytest

from avcqc.channels import CQChannel
from avcqc.exceptions import AlphabetMismatch
from avcqc.info import channel_conditional_entropy, divergence_vector, holevo_chi
from avcqc.operators import pure_state, random_density

from oracles import mutual_information


def test_chi_degenerate(rng):
    rho = random_density(3, rng)
    assert np.isclose(holevo_chi([0.3, 0.7], np.stack([rho, rho])).value, 0, atol=1e-12)


def test_chi_noiseless_bit():
    V = np.stack([pure_state([1, 0]), pure_state([0, 1])])
    assert np.isclose(holevo_chi([0.5, 0.5], V).value, 1.0)


def test_chi_zero_plus():
    V = np.stack([pure_state([1, 0]), pure_state([1, 1])])
    expect = -sum(p * np.log2(p) for p in (np.cos(np.pi / 8) ** 2, np.sin(np.pi / 8) ** 2))
    assert np.isclose(holevo_chi([0.5, 0.5], V).value, expect)
    assert np.isclose(expect, 0.600876, atol=1e-6)


def test_conditional_entropy_examples(ex1):
    V = np.stack([pure_state([1, 0]), pure_state([1, 1j])])
    assert np.isclose(channel_conditional_entropy([0.4, 0.6], V), 0, atol=1e-12)
    mixed = np.stack([np.eye(3) / 3] * 2)
    assert np.isclose(channel_conditional_entropy([0.1, 0.9], mixed), np.log2(3))
    assert np.isclose(channel_conditional_entropy([0.5, 0.5], ex1.channel(0)), 0.905639, atol=1e-6)


def test_alphabet_mismatch(ex1):
    with pytest.raises(AlphabetMismatch):
        holevo_chi([1 / 3] * 3, ex1.channel(0))


def test_divergence_average_is_chi(rng):
    V = CQChannel(("a", "b", "c"), np.stack([random_density(2, rng) for _ in range(3)]))
    P = np.array([0.2, 0.5, 0.3])
    assert np.isclose(P @ divergence_vector(P, V), holevo_chi(P, V).value)


def test_chi_matches_classical_mi(rng):
    for _ in range(5):
        T = rng.dirichlet(np.ones(3), size=2)
        P = rng.dirichlet(np.ones(2))
        V = np.stack([np.diag(r) for r in T])
        assert abs(holevo_chi(P, V).value - mutual_information(P, T)) < 1e-9
