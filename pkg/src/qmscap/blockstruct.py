"""Block decomposition of the peripheral space and its permutation+unitary dynamics.

The peripheral space of a channel decomposes as 0 ⊕ ⊕_k (B(C^{d_k}) ⊗ δ_k)
with positive definite states δ_k. This module recovers the block dimensions
(d_k, m_k), the embedding isometries, the states δ_k, the block permutation
and the per-block unitaries, and constructs the reversal channel undoing the
peripheral action.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .chanrep import (
    Channel,
    apply_to_matrix,
    dagger,
    herm,
    unvec,
    validate_channel,
    vec,
)
from .errors import (
    AlgebraClosureFailure,
    DegenerateSample,
    PermutationAmbiguity,
)
from .spectral import PeripheralProjector, apply_transfer, spectrum

TOL_SUPPORT = 1e-9
TOL_CLOSURE = 1e-7
TOL_SUBSPACE = 1e-7
CLUSTER_MERGE = 1e-6
MASS_TOL = 1e-6


@dataclass(frozen=True)
class Block:
    d_k: int
    m_k: int
    delta_k: np.ndarray          # m_k x m_k positive definite state
    isometry: np.ndarray         # d x (d_k * m_k), orthonormal columns


@dataclass(frozen=True)
class PeripheralStructure:
    dim: int
    h0_dim: int
    blocks: tuple[Block, ...]
    permutation: tuple[int, ...]   # pi[k] = source block feeding block k
    unitaries: tuple[np.ndarray, ...]
    peripheral_eigenvalues: np.ndarray

    @property
    def block_dims(self) -> tuple[int, ...]:
        return tuple(b.d_k for b in self.blocks)

    @property
    def mult_dims(self) -> tuple[int, ...]:
        return tuple(b.m_k for b in self.blocks)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def to_json(self) -> dict:
        return {
            "schema": "1",
            "dim": self.dim,
            "h0_dim": self.h0_dim,
            "blocks": [
                {
                    "d_k": b.d_k,
                    "m_k": b.m_k,
                    "delta_k": _mat_json(b.delta_k),
                    "isometry": _mat_json(b.isometry),
                }
                for b in self.blocks
            ],
            "permutation": list(self.permutation),
            "unitaries": [_mat_json(u) for u in self.unitaries],
            "peripheral_eigenvalues": [
                [float(z.real), float(z.imag)] for z in self.peripheral_eigenvalues
            ],
        }


def _mat_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


# ---------------------------------------------------------------------------
# subspace utilities (Hilbert-Schmidt geometry on vectorized operators)
# ---------------------------------------------------------------------------

def orthonormal_matrix_basis(mats: list[np.ndarray], rel_cutoff: float = 1e-10
                             ) -> list[np.ndarray]:
    """Orthonormal (HS) basis of the span of the given matrices."""
    if not mats:
        return []
    d1, d2 = mats[0].shape
    stack = np.stack([vec(m) for m in mats])
    u, s, vh = np.linalg.svd(stack, full_matrices=False)
    keep = s > rel_cutoff * s[0]
    return [unvec(v, d1, d2) for v in vh[keep]]


def subspace_distance(a: list[np.ndarray], b: list[np.ndarray]) -> float:
    """sin of the largest principal angle between two operator subspaces."""
    if len(a) != len(b):
        return 1.0
    if not a:
        return 0.0
    x = np.stack([vec(m) for m in a]).T
    y = np.stack([vec(m) for m in b]).T
    s = np.linalg.svd(x.conj().T @ y, compute_uv=False)
    smin = min(1.0, float(s.min()))
    return float(np.sqrt(max(0.0, 1.0 - smin * smin)))


def containment_residual(inner: list[np.ndarray], outer: list[np.ndarray]) -> float:
    """How far span(inner) sticks out of span(outer); 0 means contained."""
    if not inner:
        return 0.0
    x = np.stack([vec(m) for m in inner]).T
    y = np.stack([vec(m) for m in outer]).T
    resid = x - y @ (y.conj().T @ x)
    return float(np.linalg.norm(resid, 2))


def _project_onto_span(m: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    v = np.stack([b.ravel() for b in basis])
    coeff = np.conj(v) @ m.ravel()
    return (coeff @ v).reshape(m.shape)


# ---------------------------------------------------------------------------
# Wedderburn machinery: numerical decomposition of a finite-dim *-algebra
# ---------------------------------------------------------------------------

def hermitian_basis(basis: list[np.ndarray]) -> list[np.ndarray]:
    """Real-orthonormal Hermitian basis of a dagger-closed complex span."""
    cands = []
    for b in basis:
        cands.append(herm(b))
        cands.append(herm(-1j * b))
    s = len(basis[0])
    rows = []
    for c in cands:
        v = vec(c)
        rows.append(np.concatenate([v.real, v.imag]))
    u, sv, vh = np.linalg.svd(np.stack(rows), full_matrices=False)
    keep = sv > 1e-10 * sv[0]
    out = []
    for row in vh[keep]:
        v = row[: s * s] + 1j * row[s * s:]
        out.append(herm(unvec(v, s, s)))
    return out


def _center_basis(alg_basis: list[np.ndarray], herm_gens: list[np.ndarray]
                  ) -> list[np.ndarray]:
    """Hermitian basis of the center Z = A ∩ A' via a joint linear system."""
    s = alg_basis[0].shape[0]
    cols = []
    for h in herm_gens:
        rows = []
        for a in alg_basis:
            c = h @ a - a @ h
            rows.append(vec(c))
        cols.append(np.concatenate(rows))
    # columns indexed by Hermitian generators; find real null combinations
    m = np.stack(cols, axis=1)
    mr = np.concatenate([m.real, m.imag], axis=0)
    u, sv, vh = np.linalg.svd(mr, full_matrices=False)
    # basis elements are HS-normalized, so genuine noncommutativity shows up
    # as O(1) singular values; anything below the floor is central
    null_mask = sv <= max(1e-9 * (sv[0] if sv.size else 0.0), 1e-9)
    out = []
    for coeff in vh[null_mask]:
        z = sum(c * h for c, h in zip(coeff, herm_gens))
        out.append(herm(z))
    return out


def _cluster_eigenvalues(evals: np.ndarray, merge: float = CLUSTER_MERGE
                         ) -> list[np.ndarray]:
    """Indices of eigenvalue clusters; gaps below merge*spread are merged.

    An absolute floor keeps numerically-equal spectra (spread at rounding
    level) in a single cluster.
    """
    order = np.argsort(evals)
    sorted_vals = evals[order]
    spread = float(sorted_vals[-1] - sorted_vals[0])
    scale = float(np.abs(evals).max()) if evals.size else 0.0
    tol = max(merge * spread, 1e-9 * max(scale, 1e-30))
    if spread <= tol:
        return [order]
    clusters = [[order[0]]]
    for idx, val in zip(order[1:], sorted_vals[1:]):
        prev = evals[clusters[-1][-1]]
        if val - prev < tol:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    return [np.array(c) for c in clusters]


def _generic_hermitian(herm_gens: list[np.ndarray], rng: np.random.Generator
                       ) -> np.ndarray:
    coeff = rng.standard_normal(len(herm_gens))
    return herm(sum(c * h for c, h in zip(coeff, herm_gens)))


def _factorize_block(alg_basis: list[np.ndarray], herm_gens: list[np.ndarray],
                     cols: np.ndarray, rng: np.random.Generator
                     ) -> tuple[int, int, np.ndarray]:
    """Factor one central block p A p ≅ B(C^p) ⊗ 1_q.

    cols: orthonormal columns spanning the block's carrier subspace.
    Returns (p, q, W) with W mapping C^p ⊗ C^q onto the carrier such that
    the compressed algebra is span{W (x ⊗ 1_q) W^dag}.
    """
    s_a = cols.shape[1]
    for attempt in range(2):
        a = herm(dagger(cols) @ _generic_hermitian(herm_gens, rng) @ cols)
        evals, evecs = np.linalg.eigh(a)
        clusters = _cluster_eigenvalues(evals)
        mults = {len(c) for c in clusters}
        if len(mults) == 1 and len(clusters) * next(iter(mults)) == s_a:
            p = len(clusters)
            q = next(iter(mults))
            break
    else:
        raise DegenerateSample("generic element eigenvalues stayed clustered after resample")
    # guard: cluster count must square-sum correctly against the block algebra
    rs = [evecs[:, c] for c in clusters]   # each s_a x q, orthonormal
    if p == 1:
        w = cols @ rs[0]
        return p, q, w
    b = herm(dagger(cols) @ _generic_hermitian(herm_gens, rng) @ cols)
    pieces = [rs[0]]
    for i in range(1, p):
        m = dagger(rs[i]) @ b @ rs[0]
        u, sv, vh = np.linalg.svd(m)
        if sv.min() <= 1e-10 * max(sv.max(), 1e-30):
            raise DegenerateSample("connecting element is singular between diagonal blocks")
        pieces.append(rs[i] @ (u @ vh))
    w_local = np.concatenate(pieces, axis=1)   # s_a x (p*q), column order (i, j) -> i*q+j
    return p, q, cols @ w_local


def wedderburn_blocks(alg_basis: list[np.ndarray], rng: np.random.Generator,
                      tol_closure: float = TOL_CLOSURE
                      ) -> list[tuple[int, int, np.ndarray]]:
    """Decompose a unital *-algebra into blocks B(C^p) ⊗ 1_q with isometries.

    alg_basis must be an HS-orthonormal basis of a dagger-closed, unital,
    multiplicatively closed span. Raises AlgebraClosureFailure otherwise.
    """
    closure = algebra_closure_residual(alg_basis)
    if closure > tol_closure:
        raise AlgebraClosureFailure(
            f"products leave the span by {closure:.3e} (tol {tol_closure:.1e})"
        )
    herm_gens = hermitian_basis(alg_basis)
    center = _center_basis(alg_basis, herm_gens)
    k = len(center)
    s = alg_basis[0].shape[0]
    if k == 1:
        carriers = [np.eye(s, dtype=complex)]
    else:
        for attempt in range(2):
            z = _generic_hermitian(center, rng)
            evals, evecs = np.linalg.eigh(z)
            clusters = _cluster_eigenvalues(evals)
            if len(clusters) == k:
                carriers = [evecs[:, c] for c in clusters]
                break
        else:
            raise DegenerateSample("central sample did not separate the blocks twice")
    return [_factorize_block(alg_basis, herm_gens, c, rng) for c in carriers]


def algebra_closure_residual(basis: list[np.ndarray]) -> float:
    a = np.stack(basis)
    prods = np.einsum("aij,bjk->abik", a, a).reshape(len(basis) ** 2, -1)
    v = np.stack([b.ravel() for b in basis])
    resid = prods - (prods @ np.conj(v).T) @ v
    return float(np.sqrt(np.abs(resid * np.conj(resid)).sum(axis=1)).max())


# ---------------------------------------------------------------------------
# peripheral structure
# ---------------------------------------------------------------------------

def peripheral_basis(ch: Channel, proj: PeripheralProjector) -> list[np.ndarray]:
    """HS-orthonormal basis of the range of the peripheral projector."""
    tp = proj.transfer
    u, s, _ = np.linalg.svd(tp)
    r = proj.rank
    if r < tp.shape[0] and s[r] > 1e-6 * s[0]:
        raise AlgebraClosureFailure(
            f"projector numerical rank exceeds {r}: s[r]={s[r]:.3e}"
        )
    d = ch.dim_in
    return [unvec(u[:, i], d, d) for i in range(r)]


def decompose_structure(ch: Channel, proj: PeripheralProjector,
                        rng: np.random.Generator | None = None,
                        tol_support: float = TOL_SUPPORT,
                        tol_closure: float = TOL_CLOSURE) -> PeripheralStructure:
    """Recover 0 ⊕ ⊕_k (B(C^{d_k}) ⊗ δ_k) from the peripheral projector.

    Steps: support of rho_bar = P(1/d) fixes H0; multiplying the restricted
    peripheral basis by (rho_bar|_S)^{-1} removes the δ_k distortion and
    yields a unital *-algebra, which is then factorized block by block.
    """
    rng = np.random.default_rng(7) if rng is None else rng
    d = ch.dim_in
    tp = proj.transfer
    rho_bar = herm(apply_transfer(tp, np.eye(d) / d))
    evals, evecs = np.linalg.eigh(rho_bar)
    mask = evals > tol_support
    if not np.any(mask):
        raise AlgebraClosureFailure("P(1/d) has empty support")
    v_s = evecs[:, mask]
    s_dim = v_s.shape[1]
    h0_dim = d - s_dim

    basis = peripheral_basis(ch, proj)
    b_s = hermitian_basis([dagger(v_s) @ b @ v_s for b in basis])
    rho_s = herm(dagger(v_s) @ rho_bar @ v_s)
    lam_s, vec_s = np.linalg.eigh(rho_s)
    cut = 1e-12 * float(lam_s.max())
    inv_diag = np.where(lam_s > cut, 1.0 / np.maximum(lam_s, cut), 0.0)
    rho_s_inv = (vec_s * inv_diag) @ dagger(vec_s)
    a_raw = [herm(b @ rho_s_inv) for b in b_s]
    alg_basis = orthonormal_matrix_basis(a_raw)
    if len(alg_basis) != proj.rank:
        raise AlgebraClosureFailure(
            f"distortion removal changed the rank: {len(alg_basis)} != {proj.rank}"
        )
    blocks_raw = wedderburn_blocks(alg_basis, rng, tol_closure)

    blocks = []
    for d_k, m_k, w_local in blocks_raw:
        w = v_s @ w_local
        compressed = dagger(w) @ rho_bar @ w
        delta = herm(np.einsum("ijik->jk", compressed.reshape(d_k, m_k, d_k, m_k)))
        delta = delta / np.trace(delta).real
        lo = float(np.linalg.eigvalsh(delta).min())
        if lo <= 0:
            warnings.warn(
                f"recovered block state has eigenvalue {lo:.3e}; structure may be unreliable",
                RuntimeWarning, stacklevel=2,
            )
        blocks.append(Block(d_k, m_k, delta, w))

    blocks.sort(key=_block_sort_key)
    blocks = tuple(blocks)

    recon = []
    for b in blocks:
        for x in _hermitian_unit_basis(b.d_k):
            recon.append(b.isometry @ np.kron(x, b.delta_k) @ dagger(b.isometry))
    recon_basis = orthonormal_matrix_basis(recon)
    dist = subspace_distance(recon_basis, basis)
    if dist > TOL_SUBSPACE:
        raise AlgebraClosureFailure(
            f"reconstructed span misses range(P) by {dist:.3e}; peripheral tolerance mis-set?"
        )

    rep = spectrum(ch)
    peri_eigs = rep.eigenvalues[list(rep.peripheral_indices)]
    return PeripheralStructure(
        dim=d,
        h0_dim=h0_dim,
        blocks=blocks,
        permutation=tuple(range(len(blocks))),
        unitaries=tuple(np.eye(b.d_k, dtype=complex) for b in blocks),
        peripheral_eigenvalues=peri_eigs,
    )


def _block_sort_key(b: Block):
    weights = np.arange(b.isometry.shape[0], dtype=float)[:, None]
    pos = float(np.sum(np.abs(b.isometry) ** 2 * weights))
    return (-b.d_k, -b.m_k, pos)


def _hermitian_unit_basis(n: int) -> list[np.ndarray]:
    out = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        out.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            out.append(e)
            f = np.zeros((n, n), dtype=complex)
            f[i, j] = -1j
            f[j, i] = 1j
            out.append(f)
    return out


def embed_block(ps: PeripheralStructure, k: int, x: np.ndarray) -> np.ndarray:
    """Embed x ∈ B(C^{d_k}) as 0 ⊕ ... ⊕ (x ⊗ δ_k) ⊕ ... into B(C^d)."""
    b = ps.blocks[k]
    return b.isometry @ np.kron(x, b.delta_k) @ dagger(b.isometry)


def extract_dynamics(ch: Channel, ps: PeripheralStructure,
                     mass_tol: float = MASS_TOL) -> PeripheralStructure:
    """Fill the permutation and block unitaries of the peripheral action.

    Applying the channel to the embedded 1_{d_k} ⊗ δ_k identifies, for each
    source block k, the unique block receiving its content; the unitary is
    recovered from the induced conjugation map on matrix units.
    """
    kk = ps.num_blocks
    pi = [-1] * kk
    for src in range(kk):
        y = apply_to_matrix(ch, embed_block(ps, src, np.eye(ps.blocks[src].d_k)))
        total = float(np.linalg.norm(y)) ** 2
        fractions = []
        for j, b in enumerate(ps.blocks):
            yj = dagger(b.isometry) @ y @ b.isometry
            fractions.append(float(np.linalg.norm(yj)) ** 2 / total)
        j = int(np.argmax(fractions))
        if fractions[j] < 1.0 - mass_tol:
            raise PermutationAmbiguity(
                f"block {src} output spreads over blocks: best fraction {fractions[j]:.6f}"
            )
        if pi[j] != -1:
            raise PermutationAmbiguity(f"block {j} receives from both {pi[j]} and {src}")
        if ps.blocks[j].d_k != ps.blocks[src].d_k:
            raise PermutationAmbiguity(
                f"permutation links blocks of unequal dimension {ps.blocks[j].d_k} != {ps.blocks[src].d_k}"
            )
        if ps.blocks[j].m_k != ps.blocks[src].m_k:
            warnings.warn(
                f"permutation links blocks with unequal multiplicities "
                f"{ps.blocks[j].m_k} != {ps.blocks[src].m_k}",
                RuntimeWarning, stacklevel=2,
            )
        pi[j] = src
    if sorted(pi) != list(range(kk)):
        raise PermutationAmbiguity(f"receiving map is not a permutation: {pi}")

    unitaries = []
    for j in range(kk):
        src = pi[j]
        dk = ps.blocks[j].d_k
        mj = ps.blocks[j].m_k
        wj = ps.blocks[j].isometry
        t_l = np.zeros((dk * dk, dk * dk), dtype=complex)
        for a in range(dk):
            for bcol in range(dk):
                e = np.zeros((dk, dk), dtype=complex)
                e[a, bcol] = 1.0
                y = apply_to_matrix(ch, embed_block(ps, src, e))
                c = dagger(wj) @ y @ wj
                content = np.einsum("ijkj->ik", c.reshape(dk, mj, dk, mj))
                t_l[:, bcol * dk + a] = vec(content)
        u = _conjugation_unitary(t_l, dk)
        resid = np.linalg.norm(t_l - np.kron(u.T, dagger(u)))
        if resid > 1e-6:
            raise PermutationAmbiguity(
                f"block {j}: peripheral action is not a clean conjugation (residual {resid:.2e})"
            )
        unitaries.append(u)

    return replace(ps, permutation=tuple(pi), unitaries=tuple(unitaries))


def _conjugation_unitary(t_l: np.ndarray, n: int) -> np.ndarray:
    """Recover U (up to the fixed phase gauge) from T = U^T kron U^dag."""
    r = t_l.reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)
    u_svd, s, vh = np.linalg.svd(r)
    # r = a b^T with a = vec_row(U^T), b = vec_row(U^dag); svd gives b via vh[0]
    bvec = np.sqrt(s[0]) * vh[0]
    b = bvec.reshape(n, n)
    uf, _ = scipy.linalg.polar(b)
    u = dagger(uf)
    col = u[:, 0]
    nz = np.flatnonzero(np.abs(col) > 1e-9)
    if nz.size:
        phase = col[nz[0]] / abs(col[nz[0]])
        u = u * np.conj(phase)
    return u


def _state_eig(delta: np.ndarray) -> list[tuple[float, np.ndarray]]:
    evals, evecs = np.linalg.eigh(herm(delta))
    return [(float(l), evecs[:, i]) for i, l in enumerate(evals) if l > 1e-14]


def reversal_channel(ch: Channel, ps: PeripheralStructure,
                     proj: PeripheralProjector | None = None) -> Channel:
    """A channel R with R ∘ Psi = P_Psi = Psi ∘ R.

    Construction: project onto the periphery, then undo the block permutation
    and unitaries; residual mass (outside all blocks) is dumped into block 0.
    """
    from .chanrep import channel_from_transfer
    from .spectral import peripheral_projector

    if proj is None:
        proj = peripheral_projector(ch)
    d = ps.dim
    kraus = []
    for j in range(ps.num_blocks):
        k = ps.permutation[j]
        u_j = ps.unitaries[j]
        bj, bk = ps.blocks[j], ps.blocks[k]
        for lam, v in _state_eig(bk.delta_k):
            for s_idx in range(bj.m_k):
                e_s = np.zeros(bj.m_k)
                e_s[s_idx] = 1.0
                op = np.sqrt(lam) * np.outer(v, e_s)
                kraus.append(bk.isometry @ np.kron(u_j, op) @ dagger(bj.isometry))
    q = sum(b.isometry @ dagger(b.isometry) for b in ps.blocks)
    evals, evecs = np.linalg.eigh(herm(np.eye(d) - q))
    h0_cols = [evecs[:, i] for i, l in enumerate(evals) if l > 0.5]
    if h0_cols:
        b0 = ps.blocks[0]
        tau_kraus = []
        for lam, v in _state_eig(b0.delta_k):
            for i in range(b0.d_k):
                e_i = np.zeros(b0.d_k)
                e_i[i] = 1.0
                tau_kraus.append(np.sqrt(lam / b0.d_k) * b0.isometry @ np.kron(
                    e_i.reshape(-1, 1), v.reshape(-1, 1)))
        for g in h0_cols:
            for tk in tau_kraus:
                kraus.append(tk @ g.conj().reshape(1, -1))
    shuffle = validate_channel(kraus, 1e-7)

    t_shuffle, t_psi, t_p = shuffle.transfer, ch.transfer, proj.transfer
    rev = channel_from_transfer(t_shuffle @ t_p, d, tol=1e-6)
    t_rev = rev.transfer
    err1 = np.linalg.norm(t_rev @ t_psi - t_p)
    err2 = np.linalg.norm(t_psi @ t_rev - t_p)
    if max(err1, err2) > 1e-6:
        raise PermutationAmbiguity(
            f"reversal check failed: ||R Psi - P|| = {err1:.2e}, ||Psi R - P|| = {err2:.2e}"
        )
    return rev
