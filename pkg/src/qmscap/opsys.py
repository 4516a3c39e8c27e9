"""Non-commutative confusability graphs, the operator-system chain, and
zero-error capacities of highly Markovian divisible channels.

The operator system of a channel with Kraus family {K_i} is span{K_i^dag K_j}.
Under self-composition the systems form an increasing chain that stabilizes;
the stabilized system coincides with the operator system of the peripheral
projector and is (up to homomorphic equivalence) a *-algebra, for which the
independence numbers have closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockstruct import (
    PeripheralStructure,
    algebra_closure_residual,
    containment_residual,
    orthonormal_matrix_basis,
    subspace_distance,
    wedderburn_blocks,
    _project_onto_span,
)
from .chanrep import Channel, dagger, herm, replacer_channel
from .errors import ChainNotMonotone, NotAlgebra, StabilizationMismatch
from .spectral import PeripheralProjector, peripheral_projector

TOL_SUBSPACE = 1e-7


@dataclass(frozen=True)
class OperatorSystemSpace:
    dim: int
    basis: tuple[np.ndarray, ...]
    contains_identity: bool

    @property
    def subspace_dim(self) -> int:
        return len(self.basis)

    def to_json(self) -> dict:
        return {
            "schema": "1",
            "dim": self.dim,
            "subspace_dim": self.subspace_dim,
            "contains_identity": self.contains_identity,
            "basis": [
                [[[float(z.real), float(z.imag)] for z in row] for row in b]
                for b in self.basis
            ],
        }


@dataclass(frozen=True)
class AlgebraBlockStructure:
    # (mult_dim d'_k, block_dim m'_k): S = ⊕_k 1_{d'_k} ⊗ B(C^{m'_k})
    blocks: tuple[tuple[int, int], ...]
    isometries: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class IndependenceNumbers:
    alpha: int
    alpha_p: int
    alpha_q: int
    alpha_ea: int


def _span_contains(basis: list[np.ndarray], x: np.ndarray) -> float:
    return float(np.linalg.norm(x - _project_onto_span(x, list(basis))))


def operator_system(ch: Channel) -> OperatorSystemSpace:
    """S = span{K_i^dag K_j}, orthonormalized with an SVD rank cutoff."""
    prods = [dagger(a) @ b for a in ch.kraus for b in ch.kraus]
    basis = orthonormal_matrix_basis(prods)
    d = ch.dim_in
    has_id = bool(_span_contains(basis, np.eye(d, dtype=complex)) <= 1e-8 * np.sqrt(d))
    return OperatorSystemSpace(d, tuple(basis), has_id)


def _chain_step(kraus, basis: list[np.ndarray]) -> list[np.ndarray]:
    prods = [dagger(a) @ x @ b for x in basis for a in kraus for b in kraus]
    return orthonormal_matrix_basis(prods)


def opsys_chain(ch: Channel, max_l: int | None = None,
                tol: float = 1e-8) -> tuple[list[OperatorSystemSpace], int]:
    """The chain S_{Psi} ⊆ S_{Psi^2} ⊆ ... and its stabilization index L.

    Computed by the span recursion S_{Psi^{l+1}} = span{K_i^dag X K_j},
    which avoids exponential Kraus growth. L is the first chain position at
    which the subspace stops growing; L - 1 <= d^2 - dim S_{Psi}.
    """
    d = ch.dim_in
    if max_l is None:
        max_l = d * d
    if max_l < d * d:
        raise ValueError(f"max_l must be at least d^2 = {d * d}")
    current = operator_system(ch)
    chain = [current]
    for l in range(1, max_l + 1):
        nxt_basis = _chain_step(ch.kraus, list(current.basis))
        resid = containment_residual(list(current.basis), nxt_basis)
        if resid > tol:
            raise ChainNotMonotone(
                f"S at step {l} fails to contain its predecessor (residual {resid:.2e})"
            )
        if len(nxt_basis) == len(current.basis):
            return chain, l
        nxt = OperatorSystemSpace(d, tuple(nxt_basis), True)
        chain.append(nxt)
        current = nxt
    raise ChainNotMonotone(f"chain failed to stabilize within max_l={max_l} steps")


def is_star_algebra(s: OperatorSystemSpace, tol: float = TOL_SUBSPACE
                    ) -> tuple[bool, float]:
    """Whether the span is closed under matrix multiplication; returns the
    maximum projection residual over basis products."""
    resid = algebra_closure_residual(list(s.basis))
    return resid <= tol, resid


def algebra_block_structure(s: OperatorSystemSpace,
                            rng: np.random.Generator | None = None
                            ) -> AlgebraBlockStructure:
    """Wedderburn block structure of an algebraic operator system.

    Convention: the identity factor sits on the FIRST slot (multiplicity
    d'_k) and the full-matrix factor on the SECOND (m'_k), i.e.
    S = ⊕_k (1_{d'_k} ⊗ B(C^{m'_k})).
    """
    ok, resid = is_star_algebra(s)
    if not ok:
        raise NotAlgebra(f"operator system has closure residual {resid:.3e}")
    rng = np.random.default_rng(11) if rng is None else rng
    raw = wedderburn_blocks(list(s.basis), rng)
    blocks = []
    isoms = []
    for p, q, w in raw:
        # raw gives S|_block = span{W (x ⊗ 1_q) W^dag}, x ∈ B(C^p);
        # swap the factors so the identity sits first.
        d_mult, m_blk = q, p
        wsw = np.zeros_like(w)
        for a in range(d_mult):
            for b in range(m_blk):
                wsw[:, a * m_blk + b] = w[:, b * d_mult + a]
        blocks.append((d_mult, m_blk))
        isoms.append(wsw)
    order = sorted(range(len(blocks)), key=lambda i: (-blocks[i][0], -blocks[i][1]))
    return AlgebraBlockStructure(
        tuple(blocks[i] for i in order), tuple(isoms[i] for i in order)
    )


def independence_numbers(abs_: AlgebraBlockStructure) -> IndependenceNumbers:
    """alpha = sum d'_k, alpha_ea = sum d'_k^2, alpha_q = alpha_p = max d'_k."""
    ds = [b[0] for b in abs_.blocks]
    return IndependenceNumbers(
        alpha=int(sum(ds)),
        alpha_p=int(max(ds)),
        alpha_q=int(max(ds)),
        alpha_ea=int(sum(x * x for x in ds)),
    )


def restricted_projector_channel(ps: PeripheralStructure) -> Channel:
    """The channel ⊕_k (id_{k,1} ⊗ replacer_{δ_k}) on ⊕_k H_{k,1}⊗H_{k,2},
    embedded back into the ambient space via the block isometries.

    Its operator system is the *-algebra ⊕_k (1_{k,1} ⊗ B(H_{k,2})); on
    channels with trivial H0 it coincides with the peripheral projector.
    """
    kraus = []
    d = ps.dim
    for b in ps.blocks:
        rep = replacer_channel(b.delta_k)
        for rk in rep.kraus:
            kraus.append(b.isometry @ np.kron(np.eye(b.d_k), rk) @ dagger(b.isometry))
    if ps.h0_dim > 0:
        # dump H0 mass into the first block so the map is a channel
        q = sum(b.isometry @ dagger(b.isometry) for b in ps.blocks)
        evals, evecs = np.linalg.eigh(herm(np.eye(d) - q))
        b0 = ps.blocks[0]
        tau_kraus = []
        dl, dv = np.linalg.eigh(herm(b0.delta_k))
        for lam, v in [(float(l), dv[:, i]) for i, l in enumerate(dl) if l > 1e-14]:
            for i in range(b0.d_k):
                e_i = np.zeros(b0.d_k)
                e_i[i] = 1.0
                tau_kraus.append(np.sqrt(lam / b0.d_k) * b0.isometry
                                 @ np.kron(e_i.reshape(-1, 1), v.reshape(-1, 1)))
        for i, l in enumerate(evals):
            if l > 0.5:
                g = evecs[:, i]
                for tk in tau_kraus:
                    kraus.append(tk @ g.conj().reshape(1, -1))
    from .chanrep import validate_channel
    return validate_channel(kraus, 1e-8)


@dataclass(frozen=True)
class ZeroErrorReport:
    block_dims: tuple[int, ...]
    numbers: IndependenceNumbers
    c0: float        # bits
    p0: float
    q0: float
    cea0: float
    stabilization_index: int
    stabilized_dim: int

    def to_json(self) -> dict:
        return {
            "schema": "1",
            "block_dims": list(self.block_dims),
            "alpha": self.numbers.alpha,
            "alpha_p": self.numbers.alpha_p,
            "alpha_q": self.numbers.alpha_q,
            "alpha_ea": self.numbers.alpha_ea,
            "c0_bits": self.c0,
            "p0_bits": self.p0,
            "q0_bits": self.q0,
            "cea0_bits": self.cea0,
            "stabilization_index": self.stabilization_index,
            "stabilized_dim": self.stabilized_dim,
        }


def zero_error_capacities(ch: Channel, ps: PeripheralStructure,
                          proj: PeripheralProjector | None = None,
                          rng: np.random.Generator | None = None,
                          tol: float = TOL_SUBSPACE) -> ZeroErrorReport:
    """Zero-error capacities of Psi^l for l >= d^2, in bits.

    Computes the stabilized operator system, asserts it matches the
    peripheral projector's system, and evaluates the independence-number
    formulas of its *-algebra form. Cross-checked against the peripheral
    block dimensions.
    """
    rng = np.random.default_rng(13) if rng is None else rng
    if proj is None:
        proj = peripheral_projector(ch)
    chain, l_stab = opsys_chain(ch)
    stab = chain[-1]
    s_proj = operator_system(proj.projector_channel)
    dist = subspace_distance(list(stab.basis), list(s_proj.basis))
    if dist > tol:
        raise StabilizationMismatch(
            f"stabilized system vs projector system distance {dist:.3e} (tol {tol:.1e})"
        )
    ok, _ = is_star_algebra(stab)
    if ok:
        nums = independence_numbers(algebra_block_structure(stab, rng))
    else:
        pbar = restricted_projector_channel(ps)
        nums = independence_numbers(algebra_block_structure(operator_system(pbar), rng))
    dks = ps.block_dims
    expect = (sum(dks), max(dks), sum(x * x for x in dks))
    got = (nums.alpha, nums.alpha_q, nums.alpha_ea)
    if expect != got:
        raise StabilizationMismatch(
            f"independence numbers {got} disagree with peripheral formulas {expect}"
        )
    return ZeroErrorReport(
        block_dims=dks,
        numbers=nums,
        c0=float(np.log2(nums.alpha)),
        p0=float(np.log2(nums.alpha_p)),
        q0=float(np.log2(nums.alpha_q)),
        cea0=float(np.log2(nums.alpha_ea)),
        stabilization_index=l_stab,
        stabilized_dim=stab.subspace_dim,
    )


def tensor_operator_system(a: OperatorSystemSpace, b: OperatorSystemSpace
                           ) -> OperatorSystemSpace:
    basis = [np.kron(x, y) for x in a.basis for y in b.basis]
    return OperatorSystemSpace(a.dim * b.dim, tuple(basis),
                               a.contains_identity and b.contains_identity)
