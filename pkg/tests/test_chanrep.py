"""Channel representation tests: conversions checked against loop-built oracles."""

import json

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

import qmscap as q
from qmscap.chanrep import (
    channel_from_json,
    channel_to_json,
    choi_from_kraus,
    dagger,
    kraus_from_choi,
    stinespring_isometry,
    to_choi,
    to_transfer,
    unvec,
    validate_channel,
    vec,
)
from qmscap.errors import DimensionMismatch, NotTracePreserving, NonSquareChannel

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


# ----- oracles ---------------------------------------------------------------

def apply_kraus(kraus, x):
    return sum(k @ x @ dagger(k) for k in kraus)


def choi_oracle(kraus, din, dout):
    """Entrywise Choi build: J = sum_ij E_ij ⊗ Phi(E_ij)."""
    j = np.zeros((din * dout, din * dout), dtype=complex)
    for i in range(din):
        for jj in range(din):
            e = np.zeros((din, din), dtype=complex)
            e[i, jj] = 1.0
            out = apply_kraus(kraus, e)
            j[i * dout:(i + 1) * dout, jj * dout:(jj + 1) * dout] = out
    return j


def transfer_oracle(kraus, d):
    """Column-by-column transfer build from the channel action."""
    t = np.zeros((d * d, d * d), dtype=complex)
    for col in range(d * d):
        x = unvec(np.eye(d * d)[col], d, d)
        t[:, col] = vec(apply_kraus(kraus, x))
    return t


def tensor_permutation(da, db):
    """P with T_{a⊗b} = P (T_a ⊗ T_b) P^T in the column-stacking convention."""
    n = (da * db) ** 2
    p = np.zeros((n, n))
    for ia in range(da):
        for ib in range(db):
            for ja in range(da):
                for jb in range(db):
                    row = (ja * db + jb) * da * db + (ia * db + ib)
                    col = (ja * da + ia) * db * db + (jb * db + ib)
                    p[row, col] = 1.0
    return p


def random_chan(rng, d, k):
    return q.random_channel(d, k, rng)


# ----- validate_channel ------------------------------------------------------

def test_validate_identity():
    ch = validate_channel([np.eye(2)])
    assert ch.dim_in == ch.dim_out == 2


def test_validate_depolarizing_pauli_form():
    # symbolic check that the Pauli-form family resolves the identity
    p = sympy.Symbol("p", positive=True)
    sx = sympy.Matrix([[0, 1], [1, 0]])
    sy = sympy.Matrix([[0, -sympy.I], [sympy.I, 0]])
    sz = sympy.Matrix([[1, 0], [0, -1]])
    mats = [sympy.sqrt(1 - p) * sympy.eye(2)]
    for s in (sx, sy, sz):
        mats.append(sympy.sqrt(p / 3) * s)
    acc = sympy.zeros(2, 2)
    for m in mats:
        acc += m.H * m
    resid = (acc - sympy.eye(2)).subs(
        sympy.conjugate(sympy.sqrt(1 - p)), sympy.sqrt(1 - p))
    assert sympy.simplify(resid) == sympy.zeros(2, 2)

    pv = 0.5
    kraus = [np.sqrt(1 - pv) * np.eye(2), np.sqrt(pv / 3) * SX,
             np.sqrt(pv / 3) * SY, np.sqrt(pv / 3) * SZ]
    ch = validate_channel(kraus)
    assert len(ch.kraus) == 4


def test_validate_rejects_double_identity():
    with pytest.raises(NotTracePreserving):
        validate_channel([np.eye(2), np.eye(2)])


def test_validate_rejects_mixed_shapes():
    with pytest.raises(DimensionMismatch):
        validate_channel([np.eye(2), np.eye(3)])


# ----- Choi ------------------------------------------------------------------

def test_choi_identity():
    ch = q.identity_channel(2)
    expect = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            expect[i * 2 + i, j * 2 + j] = 1.0  # sum_ij |ii><jj|
    assert np.allclose(to_choi(ch), expect)


def test_choi_fully_depolarizing():
    ch = q.zoo("depolarizing", p=1.0).channel
    oracle = choi_oracle(ch.kraus, 2, 2)
    assert np.allclose(to_choi(ch), oracle, atol=1e-12)
    assert np.allclose(oracle, np.kron(np.eye(2), np.eye(2) / 2), atol=1e-12)


def test_choi_replacer():
    delta = np.array([[0.75, 0.1], [0.1, 0.25]], dtype=complex)
    ch = q.replacer_channel(delta)
    oracle = choi_oracle(ch.kraus, 2, 2)
    assert np.allclose(to_choi(ch), oracle, atol=1e-12)
    assert np.allclose(oracle, np.kron(np.eye(2), delta), atol=1e-12)


def test_choi_partial_trace_is_identity():
    rng = np.random.default_rng(0)
    ch = random_chan(rng, 3, 2)
    j = to_choi(ch)
    tr_out = np.einsum("iaja->ij", j.reshape(3, ch.dim_out, 3, ch.dim_out))
    assert np.allclose(tr_out, np.eye(3), atol=1e-10)


# ----- transfer --------------------------------------------------------------

def test_transfer_identity():
    assert np.allclose(to_transfer(q.identity_channel(2)), np.eye(4))


def test_transfer_depolarizing_eigenvalues():
    p = 0.37
    ch = q.zoo("depolarizing", p=p).channel
    t_oracle = transfer_oracle(ch.kraus, 2)
    ev = np.sort(np.linalg.eigvals(t_oracle).real)[::-1]
    assert np.allclose(ev, [1.0, 1 - p, 1 - p, 1 - p], atol=1e-10)
    assert np.allclose(to_transfer(ch), t_oracle, atol=1e-12)


def test_transfer_amplitude_damping_eigenvalues():
    g = 0.36
    ch = q.zoo("amplitude_damping", gamma=g).channel
    ev = np.sort(np.abs(np.linalg.eigvals(transfer_oracle(ch.kraus, 2))))[::-1]
    expect = np.sort([1.0, 1 - g, np.sqrt(1 - g), np.sqrt(1 - g)])[::-1]
    assert np.allclose(ev, expect, atol=1e-10)


def test_transfer_requires_square():
    rng = np.random.default_rng(1)
    v = np.linalg.qr(rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2)))[0]
    ch = validate_channel([v[:3, :], v[3:, :]])
    with pytest.raises(NonSquareChannel):
        to_transfer(ch)


# ----- compose / tensor ------------------------------------------------------

def test_compose_identity_neutral():
    ch = q.zoo("amplitude_damping", gamma=0.3).channel
    comp = q.compose(q.identity_channel(2), ch)
    assert np.allclose(to_transfer(comp), to_transfer(ch), atol=1e-12)


def test_compose_depolarizing_semigroup():
    p, r = 0.3, 0.2
    comp = q.compose(q.zoo("depolarizing", p=p).channel,
                     q.zoo("depolarizing", p=r).channel)
    expect = q.zoo("depolarizing", p=p + r - p * r).channel
    assert np.allclose(to_transfer(comp), to_transfer(expect), atol=1e-10)


def test_compose_dephasing_semigroup():
    comp = q.compose(q.zoo("dephasing", p=0.7).channel,
                     q.zoo("dephasing", p=0.4).channel)
    expect = q.zoo("dephasing", p=0.28).channel
    assert np.allclose(to_transfer(comp), to_transfer(expect), atol=1e-10)


def test_compose_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        q.compose(q.identity_channel(2), q.identity_channel(3))


def test_tensor_identity():
    t = q.tensor(q.identity_channel(2), q.identity_channel(2))
    assert np.allclose(to_transfer(t), np.eye(16), atol=1e-12)


def test_tensor_full_depolarizing_action():
    t = q.tensor(q.zoo("depolarizing", p=1.0).channel,
                 q.zoo("depolarizing", p=1.0).channel)
    for i in range(4):
        e = np.zeros((4, 4), dtype=complex)
        e[i, i] = 1.0
        out = sum(k @ e @ dagger(k) for k in t.kraus)
        assert np.allclose(out, np.eye(4) / 4, atol=1e-10)


def test_tensor_dims_multiply():
    t = q.tensor(q.identity_channel(2), q.identity_channel(3))
    assert t.dim_in == 6 and t.dim_out == 6


def test_tensor_transfer_is_permuted_kron():
    rng = np.random.default_rng(5)
    for _ in range(5):
        a = random_chan(rng, 2, 2)
        b = random_chan(rng, 3, 2)
        perm = tensor_permutation(2, 3)
        lhs = to_transfer(q.tensor(a, b))
        rhs = perm @ np.kron(to_transfer(a), to_transfer(b)) @ perm.T
        assert np.linalg.norm(lhs - rhs) < 1e-10


def test_transfer_multiplicativity_random_pairs():
    rng = np.random.default_rng(42)
    for _ in range(50):
        d = int(rng.integers(2, 5))
        a = random_chan(rng, d, int(rng.integers(1, 4)))
        b = random_chan(rng, d, int(rng.integers(1, 4)))
        lhs = to_transfer(q.compose(a, b))
        rhs = to_transfer(a) @ to_transfer(b)
        assert np.linalg.norm(lhs - rhs) < 1e-10


# ----- complementary channel -------------------------------------------------

def test_complementary_identity_is_trace():
    comp = q.complementary_channel(q.identity_channel(2))
    assert comp.dim_out == 1
    rho = np.array([[0.5, 0.2], [0.2, 0.5]], dtype=complex)
    assert np.allclose(apply_kraus(comp.kraus, rho), [[1.0]], atol=1e-12)


def test_complementary_dephasing_matrix_units():
    kraus = [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]
    ch = validate_channel(kraus)
    comp = q.complementary_channel(ch)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            out = apply_kraus(comp.kraus, e)
            oracle = np.zeros((2, 2), dtype=complex)
            for a in range(2):
                for b in range(2):
                    oracle[a, b] = np.trace(dagger(kraus[b]) @ kraus[a] @ e)
            assert np.allclose(out, oracle, atol=1e-12)


def test_complementary_stinespring_marginals():
    rng = np.random.default_rng(9)
    ch = random_chan(rng, 3, 3)
    comp = q.complementary_channel(ch)
    v = stinespring_isometry(ch)
    assert np.allclose(dagger(v) @ v, np.eye(3), atol=1e-10)
    rho = np.array(np.diag([0.5, 0.3, 0.2]), dtype=complex)
    big = v @ rho @ dagger(v)              # on out ⊗ env
    n = len(ch.kraus)
    big4 = big.reshape(3, n, 3, n)
    tr_env = np.einsum("aebe->ab", big4)
    tr_out = np.einsum("aeaf->ef", big4)
    assert np.allclose(tr_env, apply_kraus(ch.kraus, rho), atol=1e-10)
    assert np.allclose(tr_out, apply_kraus(comp.kraus, rho), atol=1e-10)


# ----- apply -----------------------------------------------------------------

def test_apply_identity():
    rho = q.DensityMatrix.validate(np.array([[0.7, 0.1], [0.1, 0.3]]))
    out = q.apply_channel(q.identity_channel(2), rho)
    assert np.allclose(out.mat, rho.mat)


def test_apply_full_depolarizing():
    rho = q.DensityMatrix.validate(np.array([[1.0, 0.0], [0.0, 0.0]]))
    out = q.apply_channel(q.zoo("depolarizing", p=1.0).channel, rho)
    assert np.allclose(out.mat, np.eye(2) / 2, atol=1e-12)


def test_apply_full_damping():
    rho = q.DensityMatrix.validate(np.array([[0.2, 0.1], [0.1, 0.8]]))
    out = q.apply_channel(q.zoo("amplitude_damping", gamma=1.0).channel, rho)
    assert np.allclose(out.mat, np.diag([1.0, 0.0]), atol=1e-12)


def test_apply_dim_mismatch():
    rho = q.DensityMatrix.validate(np.eye(3) / 3)
    with pytest.raises(DimensionMismatch):
        q.apply_channel(q.identity_channel(2), rho)


# ----- round trips and random CPTP -------------------------------------------

def test_choi_kraus_round_trip():
    rng = np.random.default_rng(21)
    for _ in range(10):
        d = int(rng.integers(2, 5))
        ch = random_chan(rng, d, int(rng.integers(1, 4)))
        ks = kraus_from_choi(to_choi(ch), d, d)
        rebuilt = validate_channel(ks)
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                assert np.linalg.norm(apply_kraus(rebuilt.kraus, e)
                                      - apply_kraus(ch.kraus, e)) < 1e-10


def test_random_cptp_representations_agree():
    rng = np.random.default_rng(33)
    for _ in range(10):
        d = int(rng.integers(2, 5))
        ch = random_chan(rng, d, 3)
        j = choi_from_kraus(ch.kraus, d, d)
        assert np.linalg.norm(j - choi_oracle(ch.kraus, d, d)) < 1e-10
        assert np.linalg.norm(to_transfer(ch) - transfer_oracle(ch.kraus, d)) < 1e-10
        ch2 = validate_channel(ch.kraus, choi=j, transfer=to_transfer(ch))
        assert ch2.dim_in == d


# ----- JSON wire format ------------------------------------------------------

def test_json_round_trip():
    ch = q.zoo("amplitude_damping", gamma=0.4).channel
    blob = json.dumps(channel_to_json(ch))
    back = channel_from_json(blob)
    assert np.allclose(to_transfer(back), to_transfer(ch), atol=1e-12)


@pytest.mark.parametrize("mutate", ["row", "col", "entry"])
def test_json_rejects_ragged(mutate):
    obj = channel_to_json(q.identity_channel(2))
    if mutate == "row":
        obj["kraus"][0].append([[0.0, 0.0], [0.0, 0.0]])
    elif mutate == "col":
        obj["kraus"][0][0].append([0.0, 0.0])
    else:
        obj["kraus"][0][0][0] = [0.0]
    with pytest.raises(DimensionMismatch):
        channel_from_json(obj)


@settings(max_examples=25, deadline=None)
@given(p=st.floats(min_value=0.0, max_value=1.0),
       seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_json_round_trip_property(p, seed):
    rng = np.random.default_rng(seed)
    ch = q.random_channel(2, 2, rng) if p < 0.5 else q.zoo("depolarizing", p=p).channel
    back = channel_from_json(channel_to_json(ch))
    assert np.allclose(to_transfer(back), to_transfer(ch), atol=1e-12)
