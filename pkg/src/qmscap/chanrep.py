"""Channel representations, conversions, validation, composition and tensor products.

Vectorization convention, fixed globally: column stacking, vec(X) = X.flatten
in Fortran order, so that vec(AXB) = (B^T kron A) vec(X) and the transfer
matrix of a Kraus family {K_i} is sum_i conj(K_i) kron K_i.

Choi convention: J = sum_ij E_ij kron Phi(E_ij), input factor first, so that
J is PSD iff the map is CP and Tr_out J = 1_in for trace-preserving maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NotCompletelyPositive,
    NotTracePreserving,
    NonSquareChannel,
)

TOL_TP = 1e-9
TOL_HERM = 1e-9
TOL_REP = 1e-9
TOL_PSD = 1e-10
KRAUS_RANK_CUTOFF = 1e-12


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`. Square by default."""
    v = np.asarray(v)
    if rows is None:
        rows = int(round(np.sqrt(v.size)))
    if cols is None:
        cols = v.size // rows
    return v.reshape(rows, cols, order="F")


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(x).T


def herm(x: np.ndarray) -> np.ndarray:
    """Hermitian part of a matrix."""
    return 0.5 * (x + dagger(x))


def _as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class DensityMatrix:
    """A validated density operator."""

    mat: np.ndarray

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @staticmethod
    def validate(mat, tol_herm: float = TOL_HERM, tol_trace: float = TOL_HERM,
                 tol_psd: float = TOL_PSD) -> "DensityMatrix":
        m = _as_matrix(mat, "density matrix")
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"density matrix must be square, got {m.shape}")
        herm_err = np.linalg.norm(m - dagger(m))
        if herm_err > tol_herm:
            raise DimensionMismatch(f"not Hermitian: ||rho - rho^dag||_F = {herm_err:.3e}")
        tr_err = abs(np.trace(m) - 1.0)
        if tr_err > tol_trace:
            raise DimensionMismatch(f"trace deviates from 1 by {tr_err:.3e}")
        lo = float(np.linalg.eigvalsh(herm(m)).min())
        if lo < -tol_psd:
            raise NotCompletelyPositive(f"negative eigenvalue {lo:.3e}")
        return DensityMatrix(m)


@dataclass(eq=False)
class Channel:
    """A CPTP map held as Kraus operators, with cached Choi/transfer forms.

    Immutable after construction; all operations are pure functions.
    """

    dim_in: int
    dim_out: int
    kraus: tuple[np.ndarray, ...]
    _choi: np.ndarray | None = field(default=None, repr=False)
    _transfer: np.ndarray | None = field(default=None, repr=False)

    @cached_property
    def choi(self) -> np.ndarray:
        if self._choi is not None:
            return self._choi
        return choi_from_kraus(self.kraus, self.dim_in, self.dim_out)

    @cached_property
    def transfer(self) -> np.ndarray:
        if self._transfer is not None:
            return self._transfer
        return transfer_from_kraus(self.kraus)

    @property
    def is_square(self) -> bool:
        return self.dim_in == self.dim_out


def kraus_from_list(kraus: Iterable) -> list[np.ndarray]:
    ks = [_as_matrix(k, "Kraus operator") for k in kraus]
    if not ks:
        raise DimensionMismatch("Kraus list is empty")
    shape = ks[0].shape
    for k in ks[1:]:
        if k.shape != shape:
            raise DimensionMismatch(f"Kraus shapes differ: {shape} vs {k.shape}")
    return ks


def validate_channel(kraus: Iterable, tol: float = TOL_TP, *,
                     choi: np.ndarray | None = None,
                     transfer: np.ndarray | None = None,
                     tol_rep: float = TOL_REP) -> Channel:
    """Build a Channel after checking trace preservation and cached-form agreement."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    ks = kraus_from_list(kraus)
    dout, din = ks[0].shape
    acc = sum(dagger(k) @ k for k in ks)
    violation = float(np.linalg.norm(acc - np.eye(din)))
    if violation > tol:
        raise NotTracePreserving(violation, tol)
    ch = Channel(din, dout, tuple(ks), _choi=choi, _transfer=transfer)
    if choi is not None:
        ref = choi_from_kraus(ks, din, dout)
        if np.linalg.norm(choi - ref) > tol_rep * max(1.0, np.linalg.norm(ref)):
            raise DimensionMismatch("cached Choi disagrees with Kraus form")
    if transfer is not None:
        ref = transfer_from_kraus(ks)
        if np.linalg.norm(transfer - ref) > tol_rep * max(1.0, np.linalg.norm(ref)):
            raise DimensionMismatch("cached transfer disagrees with Kraus form")
    return ch


def transfer_from_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    dout, din = kraus[0].shape
    if din != dout:
        raise NonSquareChannel("transfer matrix requires dim_in == dim_out")
    return sum(np.kron(np.conj(k), k) for k in kraus)


def choi_from_kraus(kraus: Sequence[np.ndarray], din: int, dout: int) -> np.ndarray:
    j = np.zeros((din * dout, din * dout), dtype=complex)
    for k in kraus:
        w = np.zeros(din * dout, dtype=complex)
        for i in range(din):
            w[i * dout:(i + 1) * dout] = k[:, i]
        j += np.outer(w, np.conj(w))
    return j


def to_choi(ch: Channel) -> np.ndarray:
    return ch.choi


def to_transfer(ch: Channel) -> np.ndarray:
    if not ch.is_square:
        raise NonSquareChannel(f"dims {ch.dim_in} != {ch.dim_out}")
    return ch.transfer


def choi_from_transfer(t: np.ndarray, din: int, dout: int) -> np.ndarray:
    # T[(b,a),(j,i)] = J[(i,a),(j,b)] for T = sum conj(K) kron K
    t4 = t.reshape(dout, dout, din, din)
    return t4.transpose(3, 1, 2, 0).reshape(din * dout, din * dout)


def transfer_from_choi(j: np.ndarray, din: int, dout: int) -> np.ndarray:
    j4 = j.reshape(din, dout, din, dout)
    return j4.transpose(3, 1, 2, 0).reshape(dout * dout, din * din)


def kraus_from_choi(j: np.ndarray, din: int, dout: int,
                    cutoff: float = KRAUS_RANK_CUTOFF,
                    tol_psd: float = TOL_PSD) -> list[np.ndarray]:
    """Minimal Kraus extraction via eigendecomposition of the Choi matrix.

    Eigenvalues below cutoff * (largest eigenvalue) are dropped; eigenvalues
    below -tol_psd raise NotCompletelyPositive.
    """
    jh = herm(j)
    evals, evecs = np.linalg.eigh(jh)
    top = float(evals.max()) if evals.size else 0.0
    if float(evals.min()) < -max(tol_psd, cutoff * max(top, 0.0)):
        raise NotCompletelyPositive(f"Choi eigenvalue {evals.min():.3e} below tolerance")
    ks = []
    for lam, v in zip(evals, evecs.T):
        if lam <= cutoff * top:
            continue
        k = np.sqrt(lam) * v.reshape(din, dout).T
        ks.append(k)
    return ks


def channel_from_choi(j: np.ndarray, din: int, dout: int, tol: float = 1e-7) -> Channel:
    ks = kraus_from_choi(j, din, dout)
    return validate_channel(ks, tol, choi=None, transfer=None)


def channel_from_transfer(t: np.ndarray, d: int, tol: float = 1e-7) -> Channel:
    ch = channel_from_choi(choi_from_transfer(t, d, d), d, d, tol)
    return Channel(d, d, ch.kraus, _transfer=t)


def compose(a: Channel, b: Channel) -> Channel:
    """The map a ∘ b (b applied first); Kraus set is all products A_i B_j."""
    if a.dim_in != b.dim_out:
        raise DimensionMismatch(f"compose: {a.dim_in} != {b.dim_out}")
    ks = [ai @ bj for ai in a.kraus for bj in b.kraus]
    return validate_channel(ks, 1e-8)


def compose_transfer(a: Channel, b: Channel, tol: float = 1e-7) -> Channel:
    """Composition via transfer-matrix product with minimal Kraus re-extraction.

    Same channel as :func:`compose` but avoids multiplicative Kraus growth.
    """
    if a.dim_in != b.dim_out or not (a.is_square and b.is_square):
        raise DimensionMismatch("compose_transfer needs square channels of equal dim")
    return channel_from_transfer(a.transfer @ b.transfer, a.dim_in, tol)


def tensor(a: Channel, b: Channel) -> Channel:
    ks = [np.kron(ai, bj) for ai in a.kraus for bj in b.kraus]
    return validate_channel(ks, 1e-8)


def complementary_channel(ch: Channel) -> Channel:
    """Complementary channel to the environment of the Stinespring dilation.

    With V = sum_e K_e kron |e>, the output is Phi^c(X)_{ef} = Tr(K_f^dag K_e X).
    """
    n = len(ch.kraus)
    comp = []
    for b in range(ch.dim_out):
        kb = np.zeros((n, ch.dim_in), dtype=complex)
        for e, k in enumerate(ch.kraus):
            kb[e, :] = k[b, :]
        comp.append(kb)
    return validate_channel(comp, 1e-8)


def stinespring_isometry(ch: Channel) -> np.ndarray:
    """V: H_in -> H_out kron H_env with Phi(X) = Tr_env V X V^dag."""
    n = len(ch.kraus)
    v = np.zeros((ch.dim_out * n, ch.dim_in), dtype=complex)
    for e, k in enumerate(ch.kraus):
        for b in range(ch.dim_out):
            v[b * n + e, :] = k[b, :]
    return v


def apply_channel(ch: Channel, rho: DensityMatrix) -> DensityMatrix:
    if rho.dim != ch.dim_in:
        raise DimensionMismatch(f"state dim {rho.dim} != channel input {ch.dim_in}")
    out = sum(k @ rho.mat @ dagger(k) for k in ch.kraus)
    return DensityMatrix.validate(out, tol_herm=1e-8, tol_trace=1e-8, tol_psd=1e-8)


def apply_to_matrix(ch: Channel, x: np.ndarray) -> np.ndarray:
    """Raw action on an arbitrary operator (no state validation)."""
    return sum(k @ x @ dagger(k) for k in ch.kraus)


def identity_channel(d: int) -> Channel:
    return validate_channel([np.eye(d)])


def replacer_channel(delta: np.ndarray, din: int | None = None) -> Channel:
    """X -> Tr(X) * delta."""
    delta = _as_matrix(delta)
    dout = delta.shape[0]
    din = dout if din is None else din
    evals, evecs = np.linalg.eigh(herm(delta))
    ks = []
    for lam, v in zip(evals, evecs.T):
        if lam <= 1e-14:
            continue
        for i in range(din):
            k = np.sqrt(lam) * np.outer(v, np.eye(din)[i])
            ks.append(k)
    return validate_channel(ks, 1e-9)


def random_channel(d: int, kraus_count: int, rng: np.random.Generator) -> Channel:
    """Haar-random Stinespring isometry via QR of a complex Gaussian matrix."""
    g = rng.standard_normal((d * kraus_count, d)) + 1j * rng.standard_normal((d * kraus_count, d))
    q, r = np.linalg.qr(g)
    q = q @ np.diag(np.sign(np.diag(r)))  # fix QR gauge for reproducibility
    v3 = q.reshape(d, kraus_count, d)
    ks = [v3[:, e, :] for e in range(kraus_count)]
    return validate_channel(ks, 1e-9)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q @ np.diag(np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------

def channel_to_json(ch: Channel) -> dict:
    """Schema: {"dim_in", "dim_out", "kraus": [[[ [re,im], ...] per row] per matrix]}."""
    return {
        "dim_in": ch.dim_in,
        "dim_out": ch.dim_out,
        "kraus": [
            [[[float(z.real), float(z.imag)] for z in row] for row in k]
            for k in ch.kraus
        ],
    }


def channel_from_json(obj: dict | str, tol: float = TOL_TP) -> Channel:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict):
        raise DimensionMismatch("channel JSON must be an object")
    try:
        din = int(obj["dim_in"])
        dout = int(obj["dim_out"])
        raw = obj["kraus"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DimensionMismatch(f"malformed channel JSON: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise DimensionMismatch("kraus must be a nonempty list")
    ks = []
    for km in raw:
        if not isinstance(km, list) or len(km) != dout:
            raise DimensionMismatch("ragged kraus array: wrong row count")
        mat = np.zeros((dout, din), dtype=complex)
        for r, row in enumerate(km):
            if not isinstance(row, list) or len(row) != din:
                raise DimensionMismatch("ragged kraus array: wrong column count")
            for c, entry in enumerate(row):
                if not isinstance(entry, list) or len(entry) != 2:
                    raise DimensionMismatch("entries must be [re, im] pairs")
                mat[r, c] = float(entry[0]) + 1j * float(entry[1])
        ks.append(mat)
    return validate_channel(ks, tol)
