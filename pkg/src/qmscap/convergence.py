"""Diamond-norm distance to the asymptotic channel, analytic convergence
bounds, Lambert-style time thresholds, IID scaling and memory lifetimes.

The measured diamond-norm values are certified intervals: the lower end comes
from projected-gradient ascent over pure inputs on a doubled system, the
upper end from a dual-feasible point of the semidefinite characterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

import cvxpy as cp

from .blockstruct import PeripheralStructure
from .chanrep import (
    Channel,
    choi_from_transfer,
    dagger,
    herm,
    vec,
)
from .errors import PreconditionViolated, SolverNotConverged
from .spectral import PeripheralProjector, asymptotic_part, peripheral_projector, spectrum


@dataclass(frozen=True)
class NormInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError(f"invalid interval [{self.lower}, {self.upper}]")

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class ConvergenceReport:
    mu: float
    t_threshold: int
    bound_curve: tuple[tuple[int, float], ...]
    measured_curve: tuple[tuple[int, NormInterval], ...]

    def to_json(self) -> dict:
        return {
            "schema": "1",
            "mu": self.mu,
            "t_threshold": self.t_threshold,
            "bound_curve": [[t, b] for t, b in self.bound_curve],
            "measured_curve": [
                [t, iv.to_json()] for t, iv in self.measured_curve
            ],
        }

    def to_csv(self) -> str:
        lines = ["t,bound,lower,upper"]
        measured = dict(self.measured_curve)
        for t, b in self.bound_curve:
            iv = measured.get(t)
            lo = f"{iv.lower:.12g}" if iv else ""
            hi = f"{iv.upper:.12g}" if iv else ""
            bstr = f"{b:.12g}" if math.isfinite(b) else "inf"
            lines.append(f"{t},{bstr},{lo},{hi}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# diamond norm of a difference of channels
# ---------------------------------------------------------------------------

def _difference_choi(a: Channel, b: Channel) -> np.ndarray:
    return a.choi - b.choi


def _trace_norm(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.svd(m, compute_uv=False)).sum())


def _apply_doubled(j_diff: np.ndarray, psi: np.ndarray, d: int, dout: int) -> np.ndarray:
    """(id ⊗ Θ)(psi psi^dag) from the difference Choi matrix.

    out[(r,o),(s,p)] = sum_ab m[r,a] J[(a,o),(b,p)] conj(m[s,b]).
    """
    m = psi.reshape(d, d)  # psi = sum m[r, a] |r> ⊗ |a>
    j4 = j_diff.reshape(d, dout, d, dout)
    out = np.einsum("ra,aobp,sb->rosp", m, j4, np.conj(m))
    return out.reshape(d * dout, d * dout)


def _ascent_lower(j_diff: np.ndarray, d: int, dout: int, restarts: int,
                  rng: np.random.Generator) -> float:
    """Projected-gradient ascent of ||(id ⊗ Θ)(psi)||_1 over pure psi."""
    j4 = j_diff.reshape(d, dout, d, dout)
    best = 0.0
    for _ in range(restarts):
        psi = rng.standard_normal(d * d) + 1j * rng.standard_normal(d * d)
        psi /= np.linalg.norm(psi)
        for _ in range(150):
            out = herm(_apply_doubled(j_diff, psi, d, dout))
            evals, evecs = np.linalg.eigh(out)
            sgn = (evecs * np.sign(evals)) @ dagger(evecs)
            # Wirtinger gradient of Tr(sgn * out(psi)) w.r.t. conj(psi)
            s4 = sgn.reshape(d, dout, d, dout)
            m = psi.reshape(d, d)
            grad = np.einsum("spro,ra,aobp->sb", s4, m, j4).reshape(-1)
            new = psi + 0.7 * grad / max(np.linalg.norm(grad), 1e-18)
            nrm = np.linalg.norm(new)
            if nrm < 1e-18:
                break
            new /= nrm
            converged = np.abs(1 - np.abs(np.vdot(new, psi))) < 1e-15
            psi = new
            if converged:
                break
        out = herm(_apply_doubled(j_diff, psi, d, dout))
        best = max(best, float(np.abs(np.linalg.eigvalsh(out)).sum()))
    return best


def _dual_upper(j_diff: np.ndarray, d: int, dout: int) -> float:
    """Certified upper bound from the dual SDP
    min (||Tr_B Y0||_inf + ||Tr_B Y1||_inf)/2, [[Y0, -J], [-J^dag, Y1]] >= 0."""
    n = d * dout
    y0 = cp.Variable((n, n), hermitian=True)
    y1 = cp.Variable((n, n), hermitian=True)
    block = cp.bmat([[y0, -j_diff], [-j_diff.conj().T, y1]])
    tr_b0 = cp.partial_trace(y0, [d, dout], 1)
    tr_b1 = cp.partial_trace(y1, [d, dout], 1)
    obj = 0.5 * (cp.lambda_max(tr_b0) + cp.lambda_max(tr_b1))
    prob = cp.Problem(cp.Minimize(obj), [block >> 0])
    prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200000, verbose=False)
    if y0.value is None:
        raise SolverNotConverged(f"diamond dual status {prob.status}")
    y0v, y1v = herm(np.asarray(y0.value)), herm(np.asarray(y1.value))
    big = np.block([[y0v, -j_diff], [-j_diff.conj().T, y1v]])
    lo = float(np.linalg.eigvalsh(herm(big)).min())
    if lo < 0.0:
        y0v = y0v + (-lo) * np.eye(n)
        y1v = y1v + (-lo) * np.eye(n)
    t0 = np.einsum("iaja->ij", y0v.reshape(d, dout, d, dout))
    t1 = np.einsum("iaja->ij", y1v.reshape(d, dout, d, dout))
    val = 0.5 * (float(np.linalg.eigvalsh(herm(t0)).max())
                 + float(np.linalg.eigvalsh(herm(t1)).max()))
    return val


def diamond_norm_interval(a: Channel, b: Channel, restarts: int = 20,
                          seed: int = 1234) -> NormInterval:
    """Certified interval for ||a - b||_diamond.

    Falls back to the looser certified pair (ascent lower,
    min(2, d^1.5 * sigma_max(T_diff)) upper) if the SDP solver fails.
    """
    if a.dim_in != b.dim_in or a.dim_out != b.dim_out:
        raise ValueError("channels must share dimensions")
    d, dout = a.dim_in, a.dim_out
    j_diff = _difference_choi(a, b)
    if np.linalg.norm(j_diff) < 1e-12:
        return NormInterval(0.0, 0.0)
    rng = np.random.default_rng(seed)
    lower = _ascent_lower(j_diff, d, dout, restarts, rng)
    try:
        upper = _dual_upper(j_diff, d, dout)
    except (SolverNotConverged, cp.SolverError):
        t_diff = a.transfer - b.transfer if d == dout else None
        loose = 2.0
        if t_diff is not None:
            loose = min(2.0, d ** 1.5 * float(np.linalg.svd(t_diff, compute_uv=False)[0]))
        upper = loose
    upper = min(upper, 2.0)    # a difference of channels never exceeds 2
    upper = max(upper, lower)  # certified bounds can cross only by solver noise
    return NormInterval(lower, upper)


# ---------------------------------------------------------------------------
# analytic bounds and thresholds
# ---------------------------------------------------------------------------

def analytic_bound(l: int, mu: float, d: int) -> float:
    """Spectral-gap convergence bound on ||Psi^l - Psi^l_inf||_diamond:
    4 e^2 d (d^2+1) / (1-(1+1/l)mu)^{3/2} * (l(1-mu^2)/mu)^{d^2-1} * mu^l."""
    if mu < 0.0 or mu >= 1.0:
        raise ValueError("mu must lie in [0, 1)")
    if mu == 0.0:
        return 0.0
    if l <= mu / (1.0 - mu):
        raise PreconditionViolated(f"need l > mu/(1-mu) = {mu / (1.0 - mu):.3f}")
    dd = d * d
    log_val = (math.log(4.0) + 2.0 + math.log(d) + math.log(dd + 1.0)
               - 1.5 * math.log(1.0 - (1.0 + 1.0 / l) * mu)
               + (dd - 1.0) * math.log(l * (1.0 - mu * mu) / mu)
               + l * math.log(mu))
    if log_val > 700.0:
        return math.inf
    return math.exp(log_val)


def lambert_surrogate_threshold(delta: float, mu: float, dim: int,
                                alpha: float) -> float:
    """Smallest real t from the closed-form radical surrogate guaranteeing
    dim^alpha * (t(1-mu^2)/mu)^dim * mu^t <= delta."""
    if not (0.0 < delta < 1.0) or not (0.0 < mu < 1.0) or alpha <= 1.0:
        raise ValueError("need delta, mu in (0,1) and alpha > 1")
    log_term = (dim + alpha) * math.log(dim) - math.log(delta)
    a = log_term / dim - math.log(mu * math.log(1.0 / mu) / (1.0 - mu * mu))
    inner = a - 1.0
    if inner < 0.0:
        inner = 0.0
    return dim / math.log(1.0 / mu) * (a + math.sqrt(2.0) * math.sqrt(inner))


def time_to_threshold(delta: float, mu: float, mu0: float, d: int,
                      alpha: float = 1.5) -> int:
    """Smallest integer t certifying ||Psi^t - Psi^t_inf||_diamond <= delta.

    Uses the radical surrogate with D = d^2 and delta' = delta (1-mu0)^{3/2} / (8 e^2),
    intersected with t >= mu/(mu0 - mu); the result is self-checked against
    analytic_bound.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0,1)")
    if mu == 0.0:
        return 1
    if not (mu < mu0 < 1.0):
        raise ValueError("need mu < mu0 < 1")
    dd = d * d
    delta_p = delta * (1.0 - mu0) ** 1.5 / (8.0 * math.e ** 2)
    t_main = lambert_surrogate_threshold(min(delta_p, 1.0 - 1e-12), mu, dd, alpha)
    t = max(int(math.ceil(t_main)), int(math.ceil(mu / (mu0 - mu))), 1)
    for _ in range(10000):
        if analytic_bound(t, mu, d) <= delta:
            return t
        t += 1
    raise SolverNotConverged("threshold self-check did not terminate")


def iid_time_to_threshold(n: int, q: int, mu: float, mu0: float,
                          delta: float) -> int:
    """Time after which n * ||Gamma^t - Gamma^t_inf||_diamond <= delta for a
    local channel on C^q; grows like ln(n)."""
    if n < 1:
        raise ValueError("n must be positive")
    if mu == 0.0:
        return 1
    t = time_to_threshold(delta / n, mu, mu0, q)
    if n * analytic_bound(t, mu, q) > delta + 1e-12:
        raise SolverNotConverged("IID threshold self-check failed")
    return t


# ---------------------------------------------------------------------------
# measured curves and lifetime bounds
# ---------------------------------------------------------------------------

def measured_delta_curve(ch: Channel, t_grid: list[int],
                         proj: PeripheralProjector | None = None,
                         restarts: int = 20, seed: int = 1234
                         ) -> list[tuple[int, NormInterval]]:
    """delta_t = ||Psi^t - Psi^t_inf||_diamond intervals over a t grid.

    Transfer powers are re-projected onto trace preservation every 16 steps
    to suppress drift (rescaling by the fixed-point action on the identity).
    """
    if proj is None:
        proj = peripheral_projector(ch)
    d = ch.dim_in
    t_psi = ch.transfer
    t_inf = asymptotic_part(ch, proj).transfer
    out = []
    cur_p, cur_i = np.eye(d * d, dtype=complex), np.eye(d * d, dtype=complex)
    step = 0
    grid = sorted(set(int(t) for t in t_grid))
    for t in range(1, max(grid) + 1):
        cur_p = t_psi @ cur_p
        cur_i = t_inf @ cur_i
        step += 1
        if step % 16 == 0:
            cur_p = _reproject_tp(cur_p, d)
            cur_i = _reproject_tp(cur_i, d)
        if t in grid:
            if np.linalg.norm(cur_p - cur_i) < 1e-12:
                out.append((t, NormInterval(0.0, 0.0)))
                continue
            a = _channel_stub(cur_p, d)
            b = _channel_stub(cur_i, d)
            out.append((t, diamond_norm_interval(a, b, restarts, seed)))
    return out


def _reproject_tp(t: np.ndarray, d: int) -> np.ndarray:
    """Remove trace-preservation drift: enforce T^dag vec(1) = vec(1)."""
    ident = vec(np.eye(d))
    drift = dagger(t) @ ident - ident
    return t - np.outer(ident, np.conj(drift)) / float(np.vdot(ident, ident).real)


class _channel_stub(Channel):
    """Channel wrapper around a raw transfer matrix (choi derived on demand)."""

    def __init__(self, transfer: np.ndarray, d: int):
        super().__init__(d, d, kraus=(), _transfer=transfer,
                         _choi=choi_from_transfer(transfer, d, d))


def convergence_report(ch: Channel, t_grid: list[int], delta: float = 0.01,
                       mu0: float | None = None, restarts: int = 20,
                       seed: int = 1234) -> ConvergenceReport:
    rep = spectrum(ch)
    mu = rep.mu
    d = ch.dim_in
    if mu0 is None:
        mu0 = 0.5 * (1.0 + mu)
    t_thr = time_to_threshold(delta, mu, mu0, d) if mu > 0 else 1
    bounds = []
    for t in sorted(set(int(x) for x in t_grid)):
        if mu == 0.0:
            bounds.append((t, 0.0))
        elif t > mu / (1.0 - mu):
            bounds.append((t, analytic_bound(t, mu, d)))
        else:
            bounds.append((t, math.inf))
    measured = measured_delta_curve(ch, t_grid, restarts=restarts, seed=seed)
    return ConvergenceReport(mu, t_thr, tuple(bounds), tuple(measured))


@dataclass(frozen=True)
class LifetimeReport:
    t_useless: int | None           # None encodes "never" (protected periphery)
    ceiling_bits: float
    curve: tuple[tuple[int, float], ...]   # (t, qubit ceiling m_eps(t))

    def to_json(self) -> dict:
        return {
            "schema": "1",
            "t_useless": self.t_useless,
            "ceiling_bits": self.ceiling_bits,
            "curve": [[t, v] for t, v in self.curve],
        }


def memory_lifetime_bound(ps: PeripheralStructure, eps: float, mu: float,
                          mu0: float | None = None,
                          t_grid: list[int] | None = None,
                          iid_copies: int | None = None,
                          local_dim: int | None = None) -> LifetimeReport:
    """Storage-lifetime bound for a memory with error budget eps.

    Trivial periphery (all d_k = 1): after t_useless steps the one-shot
    quantum capacity is capped by log 1/(1-2 eps); protected periphery
    (max d_k > 1) never becomes useless and t_useless is None. With
    iid_copies set, the threshold routes through the IID estimate and the
    time scale drops to ~ln(copies).
    """
    if not (0.0 <= eps < 0.5):
        raise ValueError("eps must lie in [0, 0.5)")
    dks = ps.block_dims
    qmax_bits = math.log2(max(dks))
    ceiling = qmax_bits + math.log2(1.0 / (1.0 - 2.0 * eps))
    if mu0 is None:
        mu0 = 0.5 * (1.0 + mu)
    d = ps.dim if iid_copies is None else (local_dim or ps.dim)
    if max(dks) > 1:
        t_useless = None
    elif mu == 0.0:
        t_useless = 1
    else:
        if eps <= 0.0:
            raise ValueError("eps must be positive for a finite lifetime estimate")
        if iid_copies is not None:
            t_useless = iid_time_to_threshold(iid_copies, d, mu, mu0, eps)
        else:
            t_useless = time_to_threshold(eps, mu, mu0, d)
    curve = []
    for t in (t_grid or []):
        if mu == 0.0:
            dt = 0.0
        elif t > mu / (1.0 - mu):
            dt = min(analytic_bound(t, mu, d), 2.0)
            if iid_copies is not None:
                dt = min(iid_copies * dt, 2.0)
        else:
            dt = 2.0
        if eps + dt < 1.0:
            curve.append((t, qmax_bits + math.log2(1.0 / (1.0 - eps - dt))))
        else:
            curve.append((t, math.inf))
    return LifetimeReport(t_useless, ceiling, tuple(curve))
