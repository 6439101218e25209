import json
from pathlib import Path

import numpy as np
import pytest

from avcqc import catalog
from avcqc.channels import (
    AVCQC,
    bar,
    classical_embed,
    double_bar,
    dump_spec,
    load_spec,
    output_state,
    product_traces,
)
from avcqc.exceptions import (
    AlphabetMismatch,
    IncompleteIndex,
    LengthMismatch,
    NotDensity,
    NotStochastic,
    SchemaError,
)
from avcqc.info import holevo_chi
from avcqc.operators import random_density, tensor, tensor_all

ROOT = Path(__file__).resolve().parents[1]


def test_spec_files_match_catalog():
    for name in ("example1", "example2"):
        W = load_spec((ROOT / "channels" / f"{name}.json").read_bytes())
        assert np.allclose(W.states, catalog.get(name).states)


def test_embed_shapes(ex1, ex2):
    assert (ex1.n_inputs, ex1.n_states, ex1.dim) == (2, 2, 2) and ex1.is_classical
    assert (ex2.n_inputs, ex2.n_states, ex2.dim) == (4, 2, 4) and ex2.is_classical


def test_embed_identity_is_noiseless():
    W = classical_embed([np.eye(3)])
    assert np.isclose(holevo_chi(np.ones(3) / 3, W.channel(0)).value, np.log2(3))


def test_embed_rejects_non_stochastic():
    with pytest.raises(NotStochastic):
        classical_embed([[[0.5, 0.4], [0, 1]]])


def test_spec_roundtrip(rng):
    states = np.array([[random_density(2, rng) for _ in range(2)] for _ in range(3)])
    W = AVCQC(("a", "b", "c"), ("u", "v"), states)
    W2 = load_spec(json.dumps(dump_spec(W)))
    assert np.allclose(W2.states, W.states)
    assert W2.input_alphabet == W.input_alphabet


def test_spec_errors(ex1):
    spec = dump_spec(ex1)
    missing = json.loads(json.dumps(spec))
    del missing["states"]["1|s1"]
    with pytest.raises(IncompleteIndex):
        load_spec(missing)
    bad = json.loads(json.dumps(spec))
    bad["states"]["0|s0"] = [[[0.5, 0], [0, 0]], [[0, 0], [0.4, 0]]]
    with pytest.raises(NotDensity) as err:
        load_spec(bad)
    assert err.value.details["violations"][0]["x"] == "0"
    with pytest.raises(SchemaError):
        load_spec("{not json")
    with pytest.raises(SchemaError):
        load_spec({"input_alphabet": ["0"]})


def test_output_state(ex1, rng):
    assert np.allclose(output_state(ex1, (0,), (1,)), ex1.states[0, 1])
    rho0 = random_density(2, rng)
    W = AVCQC(("0",), ("s",), rho0[None, None])
    assert np.allclose(output_state(W, (0, 0), (0, 0)), tensor(rho0, rho0))
    out = output_state(ex1, ("0", "1"), ("s0", "s1"))
    assert np.allclose(out, tensor(np.diag([0.75, 0.25]), np.diag([0.0, 1.0])))
    with pytest.raises(LengthMismatch):
        output_state(ex1, (0, 1), (0,))


def test_double_bar_examples(ex1, ex2):
    det = double_bar(ex1, [[1, 0], [1, 0]])
    assert np.allclose(det.states, ex1.states[:, 0])
    star = double_bar(ex1, catalog.EXAMPLE1_JAMMER)
    assert np.allclose(star.states[0], np.eye(2) / 2)
    assert np.allclose(star.states[1], np.eye(2) / 2)
    uni = double_bar(ex2, np.full((4, 2), 0.5))
    assert np.allclose(uni.states, 0.5 * ex2.states[:, 0] + 0.5 * ex2.states[:, 1])
    with pytest.raises(AlphabetMismatch):
        double_bar(ex1, np.full((3, 2), 0.5))


def test_bar(ex1):
    assert np.allclose(bar(ex1, [1, 0]).states, ex1.states[:, 0])
    with pytest.raises(AlphabetMismatch):
        bar(ex1, [1, 0, 0])


@pytest.mark.parametrize("classical", [True, False])
def test_product_traces_matches_dense(classical, rng):
    W = catalog.random_avcqc(2, 2, 2, rng, classical=classical)
    x = (0, 1, 1)
    op = random_density(8, rng)
    vals = product_traces(W, x, op)
    for s in np.ndindex(2, 2, 2):
        rho = tensor_all([W.states[a, b] for a, b in zip(x, s)])
        if classical:
            expect = np.real(np.trace(rho @ np.diag(np.diag(op))))
        else:
            expect = np.real(np.trace(rho @ op))
        assert np.isclose(vals[s], expect)
