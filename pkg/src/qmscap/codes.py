"""Zero-error storage codes built from the peripheral structure, code
evaluation against evolved channels, and the channel zoo.

The quantum code stores a block's matrix factor: encode X -> W_k (X ⊗ δ_k) W_k^dag,
decode with t applications of the reversal channel followed by restriction and
partial trace. The classical code sends the diagonal matrix units of every
block; the entanglement-assisted code superdense-codes every block. All three
are exact (zero-error) for every t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Callable

import numpy as np

from .blockstruct import (
    PeripheralStructure,
    decompose_structure,
    embed_block,
    extract_dynamics,
)
from .chanrep import (
    Channel,
    channel_from_transfer,
    dagger,
    herm,
    identity_channel,
    random_channel,
    haar_unitary,
    unvec,
    validate_channel,
    vec,
)
from .errors import DimensionMismatch, UnknownChannel
from .spectral import peripheral_projector

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class QuantumCode:
    log_dim: float                          # bits
    encoder: Channel
    decoder_builder: Callable[[int], Channel]


@dataclass(frozen=True)
class ClassicalCode:
    message_states: tuple[np.ndarray, ...]
    decode_povm_builder: Callable[[int], list[np.ndarray]]
    log_size: float                         # bits


@dataclass(frozen=True)
class EntanglementAssistedCode:
    # message states live on reference ⊗ system; the POVM likewise
    message_states: tuple[np.ndarray, ...]
    decode_povm_builder: Callable[[int], list[np.ndarray]]
    log_size: float
    ref_dim: int


@dataclass(frozen=True)
class ChannelZooEntry:
    name: str
    parameters: dict
    channel: Channel
    expected_structure: tuple[int, tuple[int, ...], tuple[int, ...]] | None = None
    # (K, sorted d_k descending, matching m_k)


# ---------------------------------------------------------------------------
# block dynamics bookkeeping: where content travels and how it rotates
# ---------------------------------------------------------------------------

def _content_trajectory(ps: PeripheralStructure, k: int, t: int
                        ) -> tuple[int, np.ndarray]:
    """After t steps, content x of block k sits in block j as G x G^dag."""
    inv = [0] * ps.num_blocks
    for j, src in enumerate(ps.permutation):
        inv[src] = j
    loc = k
    g = np.eye(ps.blocks[k].d_k, dtype=complex)
    for _ in range(t):
        loc = inv[loc]
        g = dagger(ps.unitaries[loc]) @ g
    return loc, g


def build_quantum_code(ps: PeripheralStructure, k: int, rev: Channel) -> QuantumCode:
    """Zero-error quantum code storing log2(d_k) qubits in block k."""
    blk = ps.blocks[k]
    d, dk, mk = ps.dim, blk.d_k, blk.m_k
    w = blk.isometry

    evals, evecs = np.linalg.eigh(herm(blk.delta_k))
    enc_kraus = []
    for lam, v in zip(evals, evecs.T):
        if lam <= 1e-14:
            continue
        enc_kraus.append(np.sqrt(lam) * w @ np.kron(np.eye(dk), v.reshape(-1, 1)))
    encoder = validate_channel(enc_kraus, 1e-9)

    # restriction to the block followed by partial trace over the state factor
    rest_kraus = []
    for s in range(mk):
        e_s = np.zeros(mk)
        e_s[s] = 1.0
        rest_kraus.append(np.kron(np.eye(dk), e_s.reshape(1, -1)) @ dagger(w))
    # mass outside the block is dumped into a fixed state on the code space
    q_out = np.eye(d, dtype=complex) - w @ dagger(w)
    ev_q, vec_q = np.linalg.eigh(herm(q_out))
    outside = [vec_q[:, i] for i, l in enumerate(ev_q) if l > 0.5]
    for g in outside:
        e0 = np.zeros(dk)
        e0[0] = 1.0
        rest_kraus.append(np.outer(e0, np.conj(g)))
    restrict = validate_channel(rest_kraus, 1e-8)
    t_rev = rev.transfer

    def decoder_builder(t: int) -> Channel:
        if t < 0:
            raise ValueError("t must be nonnegative")
        t_pow = np.linalg.matrix_power(t_rev, t)
        # Kraus of restrict ∘ R^t via transfer composition
        r_t = channel_from_transfer(t_pow, d, tol=1e-6)
        kraus = [a @ b for a in restrict.kraus for b in r_t.kraus]
        return validate_channel(kraus, 1e-6)

    return QuantumCode(math.log2(dk), encoder, decoder_builder)


def build_classical_code(ps: PeripheralStructure) -> ClassicalCode:
    """sum_k d_k perfectly distinguishable messages, one per diagonal matrix
    unit of every block; the POVM at time t follows the permutation+unitary
    trajectory of each message and adds an abort remainder."""
    states = []
    labels = []
    for k, blk in enumerate(ps.blocks):
        for i in range(blk.d_k):
            e = np.zeros((blk.d_k, blk.d_k), dtype=complex)
            e[i, i] = 1.0
            states.append(embed_block(ps, k, e))
            labels.append((k, i))

    def povm_builder(t: int) -> list[np.ndarray]:
        d = ps.dim
        povm = []
        total = np.zeros((d, d), dtype=complex)
        for (k, i) in labels:
            j, g = _content_trajectory(ps, k, t)
            blk = ps.blocks[j]
            e = np.zeros((ps.blocks[k].d_k, ps.blocks[k].d_k), dtype=complex)
            e[i, i] = 1.0
            proj = blk.isometry @ np.kron(g @ e @ dagger(g), np.eye(blk.m_k)) @ dagger(blk.isometry)
            proj = herm(proj)
            povm.append(proj)
            total += proj
        povm.append(herm(np.eye(d) - total))  # abort outcome, counted as failure
        return povm

    return ClassicalCode(tuple(states), povm_builder,
                         math.log2(sum(ps.block_dims)))


def _weyl_unitaries(n: int) -> list[np.ndarray]:
    """Heisenberg-Weyl orthogonal unitary basis of B(C^n)."""
    omega = np.exp(2j * np.pi / n)
    shift = np.roll(np.eye(n), 1, axis=0).astype(complex)
    clock = np.diag(omega ** np.arange(n)).astype(complex)
    out = []
    for a in range(n):
        for b in range(n):
            out.append(np.linalg.matrix_power(shift, a)
                       @ np.linalg.matrix_power(clock, b))
    return out


def build_ea_code(ps: PeripheralStructure) -> EntanglementAssistedCode:
    """sum_k d_k^2 messages: per block, a maximally entangled state rotated
    by the Heisenberg-Weyl unitaries stays orthogonal under id ⊗ Psi^t."""
    d = ps.dim
    states = []
    labels = []
    for k, blk in enumerate(ps.blocks):
        dk = blk.d_k
        # reference kets: block-k isometry columns, mutually orthogonal in C^d
        refs = [blk.isometry[:, i * blk.m_k] for i in range(dk)]
        for u_idx, u in enumerate(_weyl_unitaries(dk)):
            # |phi> = (1/sqrt(dk)) sum_i |ref_i> ⊗ (U|i>-content embedded)
            block_op = np.zeros((d * d, d * d), dtype=complex)
            for i in range(dk):
                for ip in range(dk):
                    x = np.outer(u[:, i], np.conj(u[:, ip]))
                    sys = embed_block(ps, k, x)
                    block_op += np.kron(np.outer(refs[i], np.conj(refs[ip])), sys)
            states.append(herm(block_op / dk))
            labels.append((k, u_idx))

    def povm_builder(t: int) -> list[np.ndarray]:
        povm = []
        total = np.zeros((d * d, d * d), dtype=complex)
        for (k, u_idx), _ in zip(labels, states):
            blk = ps.blocks[k]
            dk = blk.d_k
            u = _weyl_unitaries(dk)[u_idx]
            j, g = _content_trajectory(ps, k, t)
            bj = ps.blocks[j]
            refs = [blk.isometry[:, i * blk.m_k] for i in range(dk)]
            proj = np.zeros((d * d, d * d), dtype=complex)
            for i in range(dk):
                for ip in range(dk):
                    x = np.outer((g @ u)[:, i], np.conj((g @ u)[:, ip]))
                    sysproj = bj.isometry @ np.kron(x, np.eye(bj.m_k)) @ dagger(bj.isometry)
                    proj += np.kron(np.outer(refs[i], np.conj(refs[ip])), sysproj)
            proj = herm(proj / dk)
            povm.append(proj)
            total += proj
        povm.append(herm(np.eye(d * d) - total))
        return povm

    return EntanglementAssistedCode(
        tuple(states), povm_builder,
        math.log2(sum(x * x for x in ps.block_dims)), d,
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _transfer_power(ch: Channel, t: int) -> np.ndarray:
    return np.linalg.matrix_power(ch.transfer, t)


def _entanglement_fidelity_from_transfer(t_n: np.ndarray, dk: int) -> float:
    """F_e = <psi+| (id ⊗ N)(psi+) |psi+> for the dk-dim composite map."""
    acc = 0.0
    for i in range(dk):
        for j in range(dk):
            e = np.zeros((dk, dk), dtype=complex)
            e[i, j] = 1.0
            out = unvec(t_n @ vec(e), dk, dk)
            acc += out[i, j].real
    return float(acc / (dk * dk))


def _worst_case_estimate(t_n: np.ndarray, dk: int, restarts: int = 20,
                         seed: int = 99) -> float:
    """Seeded descent estimate of min_psi <psi|(id ⊗ N)(psi)|psi>; an
    estimate only, not a certificate."""
    rng = np.random.default_rng(seed)
    j = np.zeros((dk * dk, dk * dk), dtype=complex)
    for i in range(dk):
        for jj in range(dk):
            e = np.zeros((dk, dk), dtype=complex)
            e[i, jj] = 1.0
            out = unvec(t_n @ vec(e), dk, dk)
            j[np.ix_(range(i * dk, (i + 1) * dk), range(jj * dk, (jj + 1) * dk))] = out
    worst = 1.0
    for _ in range(restarts):
        psi = rng.standard_normal(dk * dk) + 1j * rng.standard_normal(dk * dk)
        psi /= np.linalg.norm(psi)
        prev = np.inf
        for _ in range(80):
            f, grad = _fidelity_and_grad(j, psi, dk)
            if prev - f < 1e-11:
                break
            prev = f
            new = psi - 0.5 * grad
            nrm = np.linalg.norm(new)
            if nrm < 1e-18:
                break
            psi = new / nrm
        f, _ = _fidelity_and_grad(j, psi, dk)
        worst = min(worst, f)
    return float(worst)


def _fidelity_and_grad(j_choi: np.ndarray, psi: np.ndarray, dk: int):
    m = psi.reshape(dk, dk)
    j4 = j_choi.reshape(dk, dk, dk, dk)
    out = np.einsum("ra,aobp,sb->rosp", m, j4, np.conj(m)).reshape(dk * dk, dk * dk)
    f = float(np.real(np.vdot(psi, out @ psi)))
    # gradient w.r.t. conj(psi) of <psi|out(psi)|psi> (quadratic in psi and conj)
    opsi = out @ psi
    s4 = np.outer(psi, np.conj(psi)).reshape(dk, dk, dk, dk)
    extra = np.einsum("spro,ra,aobp->sb", s4, m, j4).reshape(-1)
    return f, opsi + extra


def evaluate_quantum_code(ch: Channel, code: QuantumCode, t: int) -> dict:
    """Exact entanglement fidelity of D_t ∘ Psi^t ∘ E plus a worst-case
    descent estimate."""
    dk = int(round(2 ** code.log_dim))
    dec = code.decoder_builder(t)
    if code.encoder.dim_in != dk or dec.dim_out != dk:
        raise DimensionMismatch("code dims do not compose")
    t_comp = _rect_transfer(dec) @ _transfer_power(ch, t) @ _rect_transfer(code.encoder)
    return {
        "entanglement_fidelity": _entanglement_fidelity_from_transfer(t_comp, dk),
        "worst_case_estimate": _worst_case_estimate(t_comp, dk),
    }


def _rect_transfer(ch: Channel) -> np.ndarray:
    """Transfer matrix of a possibly rectangular channel."""
    return sum(np.kron(np.conj(k), k) for k in ch.kraus)


def evaluate_classical_code(ch: Channel, code: ClassicalCode, t: int) -> dict:
    t_pow = _transfer_power(ch, t)
    povm = code.decode_povm_builder(t)
    worst = 1.0
    for m, rho in enumerate(code.message_states):
        out = unvec(t_pow @ vec(rho), ch.dim_in, ch.dim_in)
        p = float(np.trace(povm[m] @ out).real)
        worst = min(worst, p)
    return {"success_prob": worst}


def evaluate_ea_code(ch: Channel, code: EntanglementAssistedCode, t: int) -> dict:
    d = ch.dim_in
    t_pow = _transfer_power(ch, t)
    povm = code.decode_povm_builder(t)
    worst = 1.0
    evolved = []
    for rho in code.message_states:
        out = _evolve_reference_system(t_pow, rho, code.ref_dim, d)
        evolved.append(out)
    for m, out in enumerate(evolved):
        p = float(np.trace(povm[m] @ out).real)
        worst = min(worst, p)
    overlap = 0.0
    for a in range(len(evolved)):
        for b in range(a + 1, len(evolved)):
            overlap = max(overlap, abs(np.vdot(vec(evolved[a]), vec(evolved[b]))))
    return {"success_prob": worst, "max_pairwise_overlap": overlap}


def _evolve_reference_system(t_pow: np.ndarray, rho: np.ndarray, dr: int,
                             d: int) -> np.ndarray:
    """(id_R ⊗ Psi^t)(rho) computed blockwise to avoid the doubled transfer."""
    r4 = rho.reshape(dr, d, dr, d)
    out = np.zeros_like(r4)
    for r in range(dr):
        for s in range(dr):
            out[r, :, s, :] = unvec(t_pow @ vec(r4[r, :, s, :]), d, d)
    return out.reshape(dr * d, dr * d)


def evaluate_code(ch: Channel, code, t: int) -> dict:
    if isinstance(code, QuantumCode):
        return evaluate_quantum_code(ch, code, t)
    if isinstance(code, ClassicalCode):
        return evaluate_classical_code(ch, code, t)
    if isinstance(code, EntanglementAssistedCode):
        return evaluate_ea_code(ch, code, t)
    raise DimensionMismatch(f"unknown code type {type(code)!r}")


# ---------------------------------------------------------------------------
# the channel zoo
# ---------------------------------------------------------------------------

def depolarizing(p: float, d: int = 2) -> Channel:
    """X -> (1-p) X + p Tr(X) 1/d."""
    ws = _weyl_unitaries(d)
    kraus = [np.sqrt(1.0 - p + p / (d * d)) * np.eye(d, dtype=complex)]
    for wmat in ws[1:]:
        kraus.append(np.sqrt(p) / d * wmat)
    return validate_channel(kraus, 1e-9)


def amplitude_damping(gamma: float) -> Channel:
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
    return validate_channel([k0, k1], 1e-9)


def dephasing(p: complex) -> Channel:
    """Diagonal-preserving qubit channel: X01 -> p X01; |p| < 1 required."""
    if abs(p) >= 1.0:
        raise ValueError("dephasing parameter must satisfy |p| < 1")
    a = np.diag([1.0, np.conj(p)]).astype(complex)
    b = np.diag([0.0, np.sqrt(1.0 - abs(p) ** 2)]).astype(complex)
    return validate_channel([a, b], 1e-9)


def correlated_pauli(n: int, p0: float = 0.4, px: float = 0.3, py: float = 0.2,
                     pz: float = 0.1) -> Channel:
    probs = np.array([p0, px, py, pz], dtype=float)
    if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError("probabilities must be positive and sum to 1")
    ops = [np.eye(2, dtype=complex), SX, SY, SZ]
    kraus = [np.sqrt(pr) * reduce(np.kron, [op] * n) for pr, op in zip(probs, ops)]
    return validate_channel(kraus, 1e-9)


def random_mixed_unitary_twirl(n: int, d: int, seed: int) -> Channel:
    """Equal mixture of three seeded Haar unitaries U_i^{⊗ n}: a generic
    finite stand-in for collective decoherence (same commutant)."""
    rng = np.random.default_rng(seed)
    kraus = []
    for _ in range(3):
        u = haar_unitary(d, rng)
        kraus.append(reduce(np.kron, [u] * n) / np.sqrt(3.0))
    return validate_channel(kraus, 1e-9)


def _correlated_pauli_expected(n: int) -> tuple[int, tuple[int, ...], tuple[int, ...]]:
    """True peripheral structure of the 4-Kraus correlated Pauli family.

    The algebra generated by {σx^⊗n, σy^⊗n, σz^⊗n} is 4-dimensional; for odd
    n the generators anticommute (one gauge qubit, a single 2^{n-1}-dim
    protected factor with multiplicity 2), for even n they commute (four
    character sectors, each a protected factor of dimension 2^{n-2}).
    """
    if n == 1:
        return 1, (1,), (1,)
    if n % 2 == 1:
        return 1, (2 ** (n - 1),), (2,)
    dk = 2 ** (n - 2)
    return 4, (dk, dk, dk, dk), (1, 1, 1, 1)


def collective_multiplicity_table(n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Schur-Weyl multiplicities for full collective qubit decoherence:
    f(n-j, j) = C(n,j) - C(n,j-1) and g(n-j, j) = n+1-2j, j = 0..floor(n/2)."""
    fs, gs = [], []
    for j in range(n // 2 + 1):
        f = math.comb(n, j) - (math.comb(n, j - 1) if j >= 1 else 0)
        fs.append(f)
        gs.append(n + 1 - 2 * j)
    return tuple(fs), tuple(gs)


def zoo(name: str, **params) -> ChannelZooEntry:
    if name == "identity":
        d = int(params.get("d", 2))
        return ChannelZooEntry(name, {"d": d}, identity_channel(d),
                               (1, (d,), (1,)))
    if name == "depolarizing":
        p = float(params.get("p", 0.5))
        d = int(params.get("d", 2))
        exp = (1, (1,), (d,)) if 0 < p else None
        return ChannelZooEntry(name, {"p": p, "d": d}, depolarizing(p, d), exp)
    if name == "amplitude_damping":
        g = float(params.get("gamma", 0.5))
        exp = (1, (1,), (1,)) if 0 < g else None
        return ChannelZooEntry(name, {"gamma": g}, amplitude_damping(g), exp)
    if name == "dephasing":
        p = complex(params.get("p", 0.3))
        exp = (2, (1, 1), (1, 1)) if abs(p) < 1 else None
        return ChannelZooEntry(name, {"p": p}, dephasing(p), exp)
    if name == "correlated_pauli":
        n = int(params.get("n", 2))
        probs = {k: float(params[k]) for k in ("p0", "px", "py", "pz") if k in params}
        ch = correlated_pauli(n, **probs) if probs else correlated_pauli(n)
        return ChannelZooEntry(name, {"n": n, **probs}, ch,
                               _correlated_pauli_expected(n))
    if name == "random_channel":
        d = int(params.get("d", 2))
        k = int(params.get("kraus_count", 2))
        seed = int(params.get("seed", 7))
        return ChannelZooEntry(name, {"d": d, "kraus_count": k, "seed": seed},
                               random_channel(d, k, np.random.default_rng(seed)),
                               None)
    if name == "random_mixed_unitary_twirl":
        n = int(params.get("n", 2))
        d = int(params.get("d", 2))
        seed = int(params.get("seed", 7))
        return ChannelZooEntry(name, {"n": n, "d": d, "seed": seed},
                               random_mixed_unitary_twirl(n, d, seed), None)
    raise UnknownChannel(f"no zoo channel named {name!r}")


ZOO_NAMES = ("identity", "depolarizing", "amplitude_damping", "dephasing",
             "correlated_pauli", "random_channel", "random_mixed_unitary_twirl")


def analyze_entry(entry: ChannelZooEntry, rng: np.random.Generator | None = None):
    """Structure pipeline for a zoo entry: projector, decomposition, dynamics."""
    proj = peripheral_projector(entry.channel)
    ps = decompose_structure(entry.channel, proj, rng)
    ps = extract_dynamics(entry.channel, ps)
    if entry.expected_structure is not None:
        k_exp, d_exp, m_exp = entry.expected_structure
        got = (ps.num_blocks, ps.block_dims, ps.mult_dims)
        if got != (k_exp, tuple(d_exp), tuple(m_exp)):
            raise DimensionMismatch(
                f"zoo {entry.name}: structure {got} != expected {(k_exp, d_exp, m_exp)}"
            )
    return proj, ps
