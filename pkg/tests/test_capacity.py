import numpy as np
import pytest

from avcqc import catalog
from avcqc.capacity import (
    MinimaxCapacity,
    cq_capacity,
    inner_min,
    inner_minimize,
    maximize_inner,
    minimax_gap,
    solve,
)
from avcqc.channels import AVCQC, double_bar
from avcqc.exceptions import NonConvergence
from avcqc.info import holevo_chi
from avcqc.operators import pure_state, random_density


def test_single_state_inner(rng):
    states = np.stack([random_density(2, rng) for _ in range(2)])[:, None]
    W = AVCQC(("0", "1"), ("s",), states)
    Q, v = inner_min(W, [0.3, 0.7])
    assert Q.shape == (2, 1)
    assert np.isclose(v, holevo_chi([0.3, 0.7], states[:, 0]).value)
    assert minimax_gap(W) == 0.0


def test_example1_inner_zero(ex1):
    for P in ([0.5, 0.5], [0.2, 0.8]):
        Q, v = inner_min(ex1, P)
        assert v < 1e-6
        rows = double_bar(ex1, Q).states
        assert np.max(np.abs(rows[0] - rows[1])) < 1e-3


def test_example2_inner(ex2):
    Q, v = inner_min(ex2, catalog.EXAMPLE2_INPUT)
    assert abs(v - catalog.LOG2_5_2) < 1e-3


def test_identical_states_capacity(rng):
    rho = random_density(2, rng)
    W = AVCQC(("0", "1"), ("s0", "s1"), np.broadcast_to(rho, (2, 2, 2, 2)).copy())
    assert abs(solve(W).value) < 1e-6


def test_solve_result_fields(ex2):
    res = solve(ex2, tol=1e-5)
    assert res.lower_bound <= res.value + 1e-12
    assert res.value >= catalog.LOG2_5_2 - 1e-3
    assert res.duality_gap < 1e-4
    d = res.to_dict()
    assert set(["value", "P_star", "Q_star", "duality_gap"]) <= set(d)


def test_supergradient_agrees(ex2):
    res = maximize_inner(ex2, tol=1e-4, method="supergradient")
    assert abs(res.value - catalog.LOG2_5_2) < 1e-3


def test_cq_capacity_methods(rng):
    V = np.stack([pure_state([1, 0]), pure_state([1, 1])])
    _, lo1, hi1 = cq_capacity(V, tol=1e-9)
    _, lo2, hi2 = cq_capacity(V, tol=1e-7, method="blahut-arimoto")
    assert lo1 <= hi1 + 1e-12 and abs(lo1 - 0.600876) < 1e-5
    assert abs(lo1 - lo2) < 1e-5


def test_non_convergence_raised(ex2):
    with pytest.raises(NonConvergence) as err:
        inner_minimize(ex2, [0.4, 0.2, 0.2, 0.2], tol=1e-12, Q0=np.tile([1.0, 0.0], (4, 1)),
                       max_iter=1)
    assert "best_value" in err.value.details


def test_probes_flag_nonunique(ex1):
    # with P = (1, 0) the row of the unused input is free
    res = inner_minimize(ex1, [1.0, 0.0], probes=4, seed=1)
    assert res.value < 1e-6 and res.nonunique
    assert not inner_minimize(ex1, [1.0, 0.0]).nonunique


def test_estimator(ex1):
    est = MinimaxCapacity(tol=1e-6).fit(ex1)
    assert abs(est.capacity_) < 1e-6
    assert est.get_params()["tol"] == 1e-6
    assert est.score(ex1) < 1e-6
