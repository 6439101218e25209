"""End-to-end acceptance checks, one test per criterion.

Each test records a ``criterion k: PASS|FAIL`` line in ``RESULTS``; the
conftest hook prints them after the run.  Tolerances are fixed here and are
not adjusted to make a check pass.
"""

import math
import time

import mpmath
import numpy as np
import pytest

from oracles import avc_capacity_oracle, mutual_information

from avcqc import catalog
from avcqc.adversary import best_state, mixed_value, success_traces
from avcqc.capacity import inner_minimize, minimax_gap, solve
from avcqc.channels import double_bar
from avcqc.cli import _random_pair
from avcqc.codes import (
    A2,
    CodeBuilder,
    ParameterPlan,
    build_code,
    chernoff_bounds,
    chernoff_tails,
    ground_set,
    hayashi_nagaoka_check,
    parameter_plan,
)
from avcqc.evaluation import evaluate
from avcqc.exceptions import InfeasiblePlan
from avcqc.info import holevo_chi
from avcqc.typicality import typicality_report

RESULTS = {}
TARGET = math.log2(5 / 2)
# capacity certificates are requested well inside every criterion tolerance
SOLVE_TOL = 1e-7


def _criterion(k, fn):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # an exception is a failed criterion, reported as such
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    dt = time.perf_counter() - t0
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({dt:.1f} s) {detail}"
    RESULTS[k] = line
    print(line)
    assert ok, line


# -- 1, 2: golden examples


def test_criterion_1_example1_capacity():
    def run():
        t0 = time.perf_counter()
        W = catalog.example1()
        r = solve(W, tol=SOLVE_TOL)
        inner = inner_minimize(W, [0.5, 0.5], tol=1e-9)
        rows = double_bar(W, inner.Q).states
        spread = float(np.max(np.abs(rows[0] - rows[1])))
        dt = time.perf_counter() - t0
        ok = abs(r.value) <= 1e-6 and spread <= 1e-9 and dt < 5
        return ok, f"C={r.value:.3e} row_spread={spread:.2e} t={dt:.2f}s"
    _criterion(1, run)


def test_criterion_2_example2_values():
    def run():
        t0 = time.perf_counter()
        W = catalog.example2()
        inner = inner_minimize(W, catalog.EXAMPLE2_INPUT, tol=1e-9)
        r = solve(W, tol=SOLVE_TOL)
        dt = time.perf_counter() - t0
        ok = abs(inner.value - TARGET) <= 1e-3 and r.value >= TARGET - 1e-3 and dt < 30
        return ok, f"inner={inner.value:.6f} C={r.value:.6f} target={TARGET:.6f} t={dt:.2f}s"
    _criterion(2, run)


# -- 3: minimax


def _random_instances(count=20):
    rng = np.random.default_rng(303)
    out = []
    for i in range(count):
        # sizes 2..3 so every instance has a real jammer and a real choice of input
        nx, ns, d = (int(v) for v in rng.integers(2, 4, size=3))
        out.append(catalog.random_avcqc(nx, ns, d, rng, classical=bool(i % 2)))
    return out


def test_criterion_3_minimax():
    def run():
        chans = [catalog.example1(), catalog.example2()] + _random_instances()
        gaps = [minimax_gap(W) for W in chans]
        worst = max(gaps)
        return worst <= 1e-4, f"{len(gaps)} channels, max gap={worst:.2e}"
    _criterion(3, run)


# -- 4, 5: operator and concentration inequalities


def test_criterion_4_hayashi_nagaoka():
    def run():
        rng = np.random.default_rng(404)
        slacks = [hayashi_nagaoka_check(*_random_pair(rng)) for _ in range(200)]
        return min(slacks) >= -1e-9, f"200 pairs, min slack eigenvalue={min(slacks):.2e}"
    _criterion(4, run)


def test_criterion_5_chernoff():
    def run():
        t0 = time.perf_counter()
        bad = []
        for L in (1000, 10000):
            for p in (0.05, 0.1, 0.3):
                for a in (0.3, 0.5):
                    up_b, lo_b = chernoff_bounds(L, p, p, a)
                    up, lo = chernoff_tails(L, p, a, trials=100_000, seed=L + int(100 * p + 10 * a))
                    if not (up < up_b and lo < lo_b):
                        bad.append((L, p, a, up, up_b, lo, lo_b))
        dt = time.perf_counter() - t0
        return not bad and dt < 60, f"12 settings x 1e5 trials, violations={bad}, t={dt:.1f}s"
    _criterion(5, run)


# -- 6: typicality


def _typicality_failures(rep):
    bad = []
    for row in rep.rows:
        if row.property.startswith(("te2", "te6")):
            ok = row.margin >= 0
        elif row.property in ("te1", "te4", "te7"):
            ok = row.margin > 0
        else:
            continue
        if not ok:
            bad.append(f"{row.property}(n={row.n},a={row.alpha},margin={row.margin:.3g})")
    for (name, alpha), v in rep.constants.items():
        if name.endswith("_lsq") and not v > 0:
            bad.append(f"{name}(a={alpha})={v:.3g}")
    return bad


def test_criterion_6_typicality():
    def run():
        t0 = time.perf_counter()
        ns, alphas = (2, 4, 6, 8), (0.5, 1.0)
        W = catalog.example1()
        bad = ["sigma:" + b for b in _typicality_failures(
            typicality_report(sigma=np.diag([0.75, 0.25]), n=ns, alpha=alphas))]
        for s in range(W.n_states):
            rep = typicality_report(channel=W.channel(s), P=[0.5, 0.5], n=ns, alpha=alphas)
            bad += [f"{W.state_alphabet[s]}:" + b for b in _typicality_failures(rep)]
        dt = time.perf_counter() - t0
        return not bad and dt < 60, f"violations={bad} t={dt:.1f}s"
    _criterion(6, run)


# -- 7, 8, 9: built codes


@pytest.fixture(scope="module")
def desk_sweep():
    W = catalog.example2()
    C = solve(W, tol=SOLVE_TOL).value
    t0 = time.perf_counter()
    out = {}
    for n in (2, 4, 6):
        b = CodeBuilder(n=n, scenario=1, rate=C / 2, seed=1).fit(W)
        out[n] = (b, evaluate(b.code_))
    return out, time.perf_counter() - t0


def test_criterion_7_desk_sweep(desk_sweep):
    def run():
        sweep, elapsed = desk_sweep
        p_a = [sweep[n][1].p_a for n in (2, 4, 6)]
        monotone = all(b <= a + 1e-12 for a, b in zip(p_a, p_a[1:]))
        counting = all(sweep[n][0].code_.counting_report()["ok"] for n in sweep)
        decomp = []
        for n, (b, rep) in sweep.items():
            d = b.code_.decomposition_bound()
            decomp.append(rep.p_a <= d["measured_bound"] + 1e-12 and rep.p_a <= d["plan_bound"] + 1e-12)
        ok = monotone and counting and all(decomp) and elapsed < 300
        return ok, (f"p_a={[round(v, 4) for v in p_a]} counting={counting} "
                    f"decomposition={decomp} t={elapsed:.0f}s")
    _criterion(7, run)


def _random_desk_codes(count=10, scenario=1):
    codes = []
    for seed in range(count):
        rng = np.random.default_rng([8, seed])
        W = catalog.random_avcqc(3, 2, 2, rng, classical=bool(seed % 2))
        n, J, I = 4, 2 + seed % 2, 9
        if scenario == 2:
            I = J * math.ceil(I / J)
        K = int(math.ceil(32 / 3 * math.log(2 * I) * I / J))
        plan = ParameterPlan.manual(n, I, J, K, W.n_inputs, W.n_states, log2_A=0.0, mu=0.5)
        g = ground_set(W, np.full(3, 1 / 3), n, plan, rng=seed)
        codes.append(build_code(W, g, plan, scenario, rng=seed))
    return codes


def _mixed_dominated(code, p_a, p_a2, rng):
    """Every probed mixed jammer scores at most the deterministic best response."""
    W, n = code.W, code.n
    nx, ns = W.n_inputs, W.n_states
    probes = [np.full((nx, ns), 1 / ns), rng.dirichlet(np.ones(ns), size=nx)]
    vals = [mixed_value(code, Q) <= p_a + 1e-12 for Q in probes]
    by_word, by_pair = code.pooled()
    table = {x: rng.dirichlet(np.ones(ns ** n)) for x in by_word}
    vals.append(mixed_value(code, table) <= p_a + 1e-12)
    for x in list(by_word)[:5]:
        vals.append(mixed_value(code, table, word=x) <= best_state(code, x)[1] + 1e-12)
    table2 = {key: rng.dirichlet(np.ones(ns ** n)) for key in by_pair}
    vals.append(mixed_value(code, table2, scenario=2) <= p_a2 + 1e-12)
    return all(vals)


def test_criterion_8_orderings(desk_sweep):
    def run():
        sweep, _ = desk_sweep
        pairs = [(b.code_, rep) for b, rep in sweep.values()]
        pairs += [(c, evaluate(c)) for c in _random_desk_codes()]
        rng = np.random.default_rng(808)
        order_ok = [all(rep.ordering(tol=1e-12).values()) for _, rep in pairs]
        gap = max(abs(rep.p_m - rep.p_m_star2) for _, rep in pairs)
        mixed_ok = [_mixed_dominated(c, rep.p_a, rep.p_a_star2, rng) for c, rep in pairs]
        ok = all(order_ok) and all(mixed_ok)
        return ok, (f"{len(pairs)} codes, orderings={sum(order_ok)}/{len(pairs)} "
                    f"max|p_m-p_m**|={gap:.1e} mixed_dominated={sum(mixed_ok)}/{len(pairs)}")
    _criterion(8, run)


def _scenario2_structure(code):
    blocks = bool(np.all(code.books // code.block_size == np.arange(code.J)[None, :]))
    by_word, by_pair = code.pooled()
    word_ok, pair_ok = True, True
    for x, (count, _) in by_word.items():
        s1, e1 = best_state(code, x, 1, mode="exhaustive")
        total = 0.0
        for (xx, j), (c, _) in by_pair.items():
            if xx != x:
                continue
            _, e2 = best_state(code, x, 2, j, mode="exhaustive")
            total += c / count * e2
            e2_at_s1 = 1.0 - float(success_traces(code, x, 2, j)[s1])
            pair_ok &= e2 >= e2_at_s1 - 1e-12
        word_ok &= total >= e1 - 1e-12
    return blocks, word_ok, pair_ok


def test_criterion_9_scenario2():
    def run():
        W = catalog.example2()
        C = solve(W, tol=SOLVE_TOL).value
        codes = [CodeBuilder(n=n, scenario=2, rate=C / 2, seed=2).fit(W).code_ for n in (2, 4)]
        codes += _random_desk_codes(count=4, scenario=2)
        res = [_scenario2_structure(c) for c in codes]
        ok = all(all(r) for r in res)
        return ok, (f"{len(codes)} codes, blocks={sum(r[0] for r in res)} "
                    f"per_word={sum(r[1] for r in res)} per_pair={sum(r[2] for r in res)}")
    _criterion(9, run)


# -- 10: parameter ledger


def _independent_K(eps, lam, n, nx, ns, C_P):
    with mpmath.workdps(60):
        log_xs = mpmath.log(nx * ns)
        A = mpmath.power(2, -n * (mpmath.mpf(C_P) - mpmath.mpf(eps) / 2))
        base = n * log_xs / A
        I = mpmath.floor(base / (3 - mpmath.e)) + 1
        a1 = I / base
        a2 = mpmath.mpf(1) / 27
        a = 32 * a1 * log_xs ** 2 / a2 ** 3
        lam = mpmath.mpf(lam)
        K_sub = int(mpmath.floor(a * n ** 2 / lam ** 3))
        lam_p = a2 * lam
        K_comp = int(mpmath.floor(32 * n * I * log_xs / (lam_p * lam_p ** 2 / A)))
    return K_sub, K_comp


def test_criterion_10_parameter_ledger():
    def run():
        bad, count = [], 0
        for n in (20, 30, 40):
            for lam in (0.1, 0.2, 0.3):
                for eps in (0.1, 0.2):
                    try:
                        plan = parameter_plan(eps, lam, n, 4, 2, 1.0)
                    except InfeasiblePlan as exc:
                        plan = ParameterPlan.from_dict(exc.details["plan"])
                    K_sub, K_comp = _independent_K(eps, lam, n, 4, 2, 1.0)
                    count += 1
                    if not (plan.K_size == K_sub == K_comp and plan.K_routes["agree"]
                            and plan.a2 == float(A2)):
                        bad.append((n, lam, eps, plan.K_size, K_sub, K_comp))
        return not bad, f"{count} grid points, mismatches={bad}"
    _criterion(10, run)


# -- 11: oracles


def test_criterion_11_oracles():
    def run():
        rng = np.random.default_rng(1111)
        diffs = []
        for _ in range(50):
            nx, dim = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            T = rng.dirichlet(np.ones(dim), size=nx)
            P = rng.dirichlet(np.ones(nx))
            states = np.array([np.diag(row).astype(complex) for row in T])
            diffs.append(abs(float(holevo_chi(P, states)) - mutual_information(P, T)))
        chi_ok = max(diffs) <= 1e-9
        gaps = []
        for W in (catalog.example1(), catalog.example2()):
            mats = [np.real(np.diagonal(W.states[:, s], axis1=1, axis2=2)) for s in range(W.n_states)]
            oracle, _ = avc_capacity_oracle(mats)
            gaps.append(abs(solve(W, tol=SOLVE_TOL).value - oracle))
        ok = chi_ok and max(gaps) <= 2e-3
        return ok, f"max|chi-I|={max(diffs):.1e} capacity gaps={[f'{g:.1e}' for g in gaps]}"
    _criterion(11, run)
