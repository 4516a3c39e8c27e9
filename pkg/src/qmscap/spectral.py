"""Transfer-matrix spectrum, peripheral projector, asymptotic channel, spectral gap.

The peripheral projector is assembled from an ordered Schur decomposition of
the transfer matrix: the peripheral cluster is rotated into the leading block
T11, the Sylvester equation T11 Y - Y T22 = T12 is solved, and the Riesz
projector is Q [[I, Y], [0, 0]] Q^dag. The peripheral part is semisimple, but
raw eigenvector matrices can be ill-conditioned; the Schur route is
backward-stable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chanrep import (
    Channel,
    channel_from_choi,
    choi_from_transfer,
    to_transfer,
    vec,
    unvec,
)
from .errors import AmbiguousPeriphery, EigSolverFailure, NonSquareChannel, ProjectorNotCP

TOL_PERI = 1e-8


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray          # sorted: descending modulus, then argument
    peripheral_indices: tuple[int, ...]
    mu: float                        # spectral radius of the non-peripheral part
    gap_margin: float                # smallest kept |λ| minus largest dropped |λ|

    def to_json(self) -> dict:
        return {
            "schema": "1",
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "peripheral_indices": list(self.peripheral_indices),
            "mu": float(self.mu),
            "gap_margin": float(self.gap_margin),
        }


@dataclass(frozen=True)
class PeripheralProjector:
    projector_channel: Channel
    rank: int

    @property
    def transfer(self) -> np.ndarray:
        return self.projector_channel.transfer


def _sorted_spectrum(t: np.ndarray) -> np.ndarray:
    try:
        ev = np.linalg.eigvals(t)
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailure(str(exc)) from exc
    order = np.lexsort((np.angle(ev), -np.abs(ev)))
    return ev[order]


def spectrum(ch: Channel, tol_peri: float = TOL_PERI, strict: bool = False) -> SpectrumReport:
    """Eigenvalues of the transfer matrix with the peripheral set identified."""
    if not ch.is_square:
        raise NonSquareChannel("spectrum requires a square channel")
    if not (0 < tol_peri < 0.5):
        raise ValueError("tol_peri must lie in (0, 0.5)")
    ev = _sorted_spectrum(to_transfer(ch))
    mods = np.abs(ev)
    peri = tuple(int(i) for i in np.flatnonzero(1.0 - mods <= tol_peri))
    if not peri:
        raise EigSolverFailure("no peripheral eigenvalue found; 1 must always be one")
    dropped = [m for i, m in enumerate(mods) if i not in peri]
    mu = max(dropped) if dropped else 0.0
    kept_min = min(mods[i] for i in peri)
    gap_margin = float(kept_min - mu)
    if gap_margin < 10 * tol_peri:
        msg = (f"peripheral split is ambiguous: gap_margin={gap_margin:.3e} "
               f"< 10*tol_peri={10 * tol_peri:.1e}")
        if strict:
            raise AmbiguousPeriphery(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return SpectrumReport(ev, peri, float(mu), gap_margin)


def _riesz_projector(t: np.ndarray, tol_peri: float) -> tuple[np.ndarray, int]:
    """Riesz projector onto the span of peripheral (|λ| >= 1 - tol) eigenvectors."""
    n = t.shape[0]
    try:
        s, q, sdim = scipy.linalg.schur(
            t, output="complex", sort=lambda lam: abs(lam) >= 1.0 - tol_peri
        )
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise EigSolverFailure(str(exc)) from exc
    r = int(sdim)
    if r == 0:
        raise EigSolverFailure("Schur reordering selected no peripheral eigenvalue")
    if r == n:
        return np.eye(n, dtype=complex), r
    s11, s12, s22 = s[:r, :r], s[:r, r:], s[r:, r:]
    y = scipy.linalg.solve_sylvester(s11, -s22, s12)
    p_block = np.zeros((n, n), dtype=complex)
    p_block[:r, :r] = np.eye(r)
    p_block[:r, r:] = y
    return q @ p_block @ q.conj().T, r


def peripheral_projector(ch: Channel, tol_peri: float = TOL_PERI,
                         strict: bool = False) -> PeripheralProjector:
    """The idempotent channel projecting onto the peripheral space."""
    rep = spectrum(ch, tol_peri, strict=strict)
    t = to_transfer(ch)
    tp, rank = _riesz_projector(t, tol_peri)
    if rank != len(rep.peripheral_indices):
        raise AmbiguousPeriphery(
            f"Schur selected {rank} eigenvalues, spectrum found {len(rep.peripheral_indices)}"
        )
    d = ch.dim_in
    idem = np.linalg.norm(tp @ tp - tp)
    comm = np.linalg.norm(tp @ t - t @ tp)
    if idem > 1e-7 or comm > 1e-7:
        raise EigSolverFailure(
            f"projector assembly inaccurate: idempotency {idem:.2e}, commutation {comm:.2e}"
        )
    choi = choi_from_transfer(tp, d, d)
    lo = float(np.linalg.eigvalsh(0.5 * (choi + choi.conj().T)).min())
    if lo < -1e-7:
        raise ProjectorNotCP(
            f"projector Choi eigenvalue {lo:.3e}; peripheral tolerance likely misconfigured"
        )
    base = channel_from_choi(choi, d, d, tol=1e-7)
    pch = Channel(d, d, base.kraus, _transfer=tp)
    return PeripheralProjector(pch, rank)


def asymptotic_part(ch: Channel, proj: PeripheralProjector) -> Channel:
    """Psi_inf = Psi ∘ P_Psi, the channel keeping only peripheral components."""
    t = to_transfer(ch)
    tp = proj.transfer
    tinf = t @ tp
    if np.linalg.norm(tinf - tp @ t) > 1e-6:
        raise EigSolverFailure("projector does not commute with the channel")
    d = ch.dim_in
    base = channel_from_choi(choi_from_transfer(tinf, d, d), d, d, tol=1e-7)
    return Channel(d, d, base.kraus, _transfer=tinf)


def spectral_gap(ch: Channel, tol_peri: float = TOL_PERI) -> float:
    """mu = spr(Psi - Psi_inf); the spectral gap of the channel is 1 - mu."""
    return spectrum(ch, tol_peri).mu


def apply_transfer(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Action of a superoperator in transfer form on a matrix."""
    d = x.shape[0]
    return unvec(t @ vec(x), d, d)
