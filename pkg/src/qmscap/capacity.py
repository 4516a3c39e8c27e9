"""Divergence primitives and closed-form capacity/interval evaluators.

All logarithms are base 2; capacities and divergences are reported in bits.
Support conditions follow the usual conventions: a violated condition makes
the divergence +inf rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

import cvxpy as cp

from .blockstruct import PeripheralStructure
from .chanrep import Channel, dagger, herm
from .errors import NumericalNonHermitian, SolverNotConverged

LOG2 = math.log(2.0)
SUPPORT_CUTOFF = 1e-12


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class DivergenceKind:
    tag: str                      # umegaki | petz | sandwiched | max | min | hypothesis
    alpha: float | None = None    # for petz / sandwiched
    eps: float | None = None      # for hypothesis

    def __post_init__(self):
        if self.tag in ("petz", "sandwiched"):
            if self.alpha is None or self.alpha <= 0 or self.alpha == 1.0:
                raise ValueError("alpha must lie in (0,1) ∪ (1,inf)")
        if self.tag == "hypothesis":
            if self.eps is None or not (0.0 <= self.eps <= 1.0):
                raise ValueError("eps must lie in [0,1]")


UMEGAKI = DivergenceKind("umegaki")
DMAX = DivergenceKind("max")
DMIN = DivergenceKind("min")


def _check_hermitian(m: np.ndarray, name: str) -> np.ndarray:
    dev = float(np.linalg.norm(m - dagger(m)))
    if dev > 1e-8 * max(1.0, float(np.linalg.norm(m))):
        raise NumericalNonHermitian(f"{name} deviates from Hermitian by {dev:.3e}")
    return herm(m)


def _support_data(m: np.ndarray):
    evals, evecs = np.linalg.eigh(m)
    top = float(evals.max()) if evals.size else 0.0
    mask = evals > SUPPORT_CUTOFF * max(top, 1.0) if top > 0 else evals > SUPPORT_CUTOFF
    return evals, evecs, mask


def _supp_contained(rho: np.ndarray, sigma: np.ndarray) -> bool:
    ev_s, vec_s, mask_s = _support_data(sigma)
    kernel = vec_s[:, ~mask_s]
    if kernel.shape[1] == 0:
        return True
    leak = float(np.linalg.norm(dagger(kernel) @ rho @ kernel))
    return leak <= 1e-10 * max(1.0, float(np.linalg.norm(rho)))


def _products_nonzero(rho: np.ndarray, sigma: np.ndarray) -> bool:
    # rho·sigma != 0  <=>  the supports are not orthogonal
    return float(np.abs(np.trace(rho @ sigma))) > 1e-14


def _mat_power(m: np.ndarray, p: float) -> np.ndarray:
    """Power on the support (pseudo-power for negative exponents)."""
    evals, evecs, mask = _support_data(m)
    out = np.zeros_like(m)
    for lam, i in zip(evals, range(len(evals))):
        if mask[i]:
            out += (lam ** p) * np.outer(evecs[:, i], np.conj(evecs[:, i]))
    return out


def _mat_log2(m: np.ndarray) -> np.ndarray:
    evals, evecs, mask = _support_data(m)
    out = np.zeros_like(m)
    for i, lam in enumerate(evals):
        if mask[i]:
            out += math.log2(lam) * np.outer(evecs[:, i], np.conj(evecs[:, i]))
    return out


def relative_entropy(kind: DivergenceKind, rho: np.ndarray, sigma: np.ndarray) -> float:
    """D(rho || sigma) in bits for the requested divergence; +inf on support
    violation, per convention."""
    rho = _check_hermitian(np.asarray(rho, dtype=complex), "rho")
    sigma = _check_hermitian(np.asarray(sigma, dtype=complex), "sigma")
    if rho.shape != sigma.shape:
        raise NumericalNonHermitian(f"shape mismatch {rho.shape} vs {sigma.shape}")

    if kind.tag == "umegaki":
        if not _supp_contained(rho, sigma):
            return math.inf
        val = np.trace(rho @ (_mat_log2(rho) - _mat_log2(sigma))).real
        return float(val)

    if kind.tag == "petz":
        a = kind.alpha
        if a < 1.0:
            if not _products_nonzero(rho, sigma):
                return math.inf
        elif not _supp_contained(rho, sigma):
            return math.inf
        q = np.trace(_mat_power(rho, a) @ _mat_power(sigma, 1.0 - a)).real
        return float(math.log2(max(q, 1e-300)) / (a - 1.0))

    if kind.tag == "sandwiched":
        a = kind.alpha
        if a < 1.0:
            if not _products_nonzero(rho, sigma):
                return math.inf
        elif not _supp_contained(rho, sigma):
            return math.inf
        s_pow = _mat_power(sigma, (1.0 - a) / (2.0 * a))
        inner = herm(s_pow @ rho @ s_pow)
        q = np.trace(_mat_power(inner, a)).real
        return float(math.log2(max(q, 1e-300)) / (a - 1.0))

    if kind.tag == "max":
        if not _supp_contained(rho, sigma):
            return math.inf
        s_inv_half = _mat_power(sigma, -0.5)
        op = herm(s_inv_half @ rho @ s_inv_half)
        return float(math.log2(max(float(np.linalg.eigvalsh(op).max()), 1e-300)))

    if kind.tag == "min":
        if not _products_nonzero(rho, sigma):
            return math.inf
        _, evecs, mask = _support_data(rho)
        pi = evecs[:, mask] @ dagger(evecs[:, mask])
        val = np.trace(pi @ sigma).real
        return float(-math.log2(max(val, 1e-300)))

    if kind.tag == "hypothesis":
        return _hypothesis_testing(rho, sigma, kind.eps)

    raise ValueError(f"unknown divergence tag {kind.tag!r}")


def _np_test_stats(rho: np.ndarray, sigma: np.ndarray, s: float):
    kernel_tol = 1e-11 * (float(np.linalg.norm(rho, 2)) + s * float(np.linalg.norm(sigma, 2)))
    evals, evecs = np.linalg.eigh(herm(rho - s * sigma))
    pos = evecs[:, evals > kernel_tol]
    ker = evecs[:, np.abs(evals) <= kernel_tol]
    p_pos = pos @ dagger(pos) if pos.shape[1] else np.zeros_like(rho)
    p_ker = ker @ dagger(ker) if ker.shape[1] else np.zeros_like(rho)
    return (
        float(np.trace(p_pos @ rho).real), float(np.trace(p_pos @ sigma).real),
        float(np.trace(p_ker @ rho).real), float(np.trace(p_ker @ sigma).real),
    )


def _hypothesis_testing(rho: np.ndarray, sigma: np.ndarray, eps: float) -> float:
    """D_H^eps via the Neyman–Pearson structure: the optimal test is the
    positive-part projector of rho - s*sigma plus a fractional weight on the
    crossing eigenspace; s located by monotone bisection on Tr(test * rho)."""
    if eps >= 1.0:
        return math.inf
    target = 1.0 - eps

    # mass of rho outside supp(sigma): if it already meets the target, the
    # sigma-cost can be made 0 and the divergence is +inf
    ev_s, vec_s, mask_s = _support_data(sigma)
    ker_s = vec_s[:, ~mask_s]
    if ker_s.shape[1]:
        off_mass = float(np.trace(dagger(ker_s) @ rho @ ker_s).real)
        if off_mass >= target - 1e-12:
            return math.inf

    # eps = 0: the optimal test is the support projector of rho
    if eps <= 0.0:
        _, evecs, mask = _support_data(rho)
        pi = evecs[:, mask] @ dagger(evecs[:, mask])
        val = float(np.trace(pi @ sigma).real)
        return float(-math.log2(max(val, 1e-300)))

    # grow hi until even the closed positive part captures < target
    lo, hi = 0.0, 1.0
    for _ in range(300):
        r_pos, _, r_ker, _ = _np_test_stats(rho, sigma, hi)
        if r_pos + r_ker < target:
            break
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r_pos, _, r_ker, _ = _np_test_stats(rho, sigma, mid)
        if r_pos + r_ker >= target > r_pos:
            lo = hi = mid
            break
        if r_pos >= target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    s_star = 0.5 * (lo + hi)
    r_pos, s_pos, r_ker, s_ker = _np_test_stats(rho, sigma, s_star)
    if r_ker > 1e-15:
        w = min(1.0, max(0.0, (target - r_pos) / r_ker))
    else:
        w = 0.0
    if r_pos + w * r_ker < target - 1e-9:
        w = 1.0  # conservative fallback: keep the test feasible
    cost = s_pos + w * s_ker
    return float(-math.log2(max(cost, 1e-300)))


# ---------------------------------------------------------------------------
# interval evaluators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateInterval:
    lower: float
    upper: float
    valid: bool

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "valid": self.valid}


@dataclass(frozen=True)
class CapacityReport:
    block_dims: tuple[int, ...]
    q_inf: float
    p_inf: float
    c_inf: float
    cea_inf: float
    regime: str
    intervals: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema": "1",
            "block_dims": list(self.block_dims),
            "q_inf_bits": self.q_inf,
            "p_inf_bits": self.p_inf,
            "c_inf_bits": self.c_inf,
            "cea_inf_bits": self.cea_inf,
            "regime": self.regime,
            "intervals": {k: v.to_json() for k, v in self.intervals.items()},
        }


def _structure_logs(ps: PeripheralStructure) -> tuple[float, float, float]:
    dks = ps.block_dims
    return (math.log2(max(dks)), math.log2(sum(dks)),
            math.log2(sum(x * x for x in dks)))


def infinite_time_report(ps: PeripheralStructure, regime: str = "asymptotic"
                         ) -> CapacityReport:
    qmax, csum, ceasum = _structure_logs(ps)
    return CapacityReport(ps.block_dims, qmax, qmax, csum, ceasum, regime)


def storage_bounds(ps: PeripheralStructure, eps: float, delta_t: float
                   ) -> CapacityReport:
    """One-shot eps-error capacity interval of Psi^t given delta_t =
    ||Psi^t - Psi^t_inf||_diamond: lower bounds are exact achievability,
    upper bounds add log 1/(1 - eps - delta_t) when eps + delta_t < 1."""
    if not (0.0 <= eps < 1.0) or delta_t < 0.0:
        raise ValueError("need eps in [0,1) and delta_t >= 0")
    qmax, csum, ceasum = _structure_logs(ps)
    ok = eps + delta_t < 1.0
    slack = math.log2(1.0 / (1.0 - eps - delta_t)) if ok else math.inf
    ivs = {
        "quantum": RateInterval(qmax, qmax + slack if ok else math.inf, ok),
        "private": RateInterval(qmax, qmax + slack if ok else math.inf, ok),
        "classical": RateInterval(csum, csum + slack if ok else math.inf, ok),
        "ea": RateInterval(ceasum, ceasum + slack if ok else math.inf, ok),
    }
    rep = infinite_time_report(ps, "storage")
    return CapacityReport(rep.block_dims, rep.q_inf, rep.p_inf, rep.c_inf,
                          rep.cea_inf, "storage", ivs)


def transmission_bounds(ps: PeripheralStructure, delta_l: float, alpha: float,
                        d: int) -> CapacityReport:
    """Asymptotic capacity intervals of Psi^l given delta_l."""
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if delta_l < 0.0:
        raise ValueError("delta_l must be nonnegative")
    qmax, csum, ceasum = _structure_logs(ps)
    q_ok = delta_l < 2.0
    q_slack = (alpha / (alpha - 1.0)) * math.log2(
        1.0 + delta_l * d ** ((alpha - 1.0) / alpha) / 2.0)
    assisted_slack = math.log2(1.0 + delta_l * d / 2.0)
    c_ok = delta_l / 2.0 <= 1.0 - 1.0 / (d * d)
    c_slack = delta_l * math.log2(d * d - 1.0) + 2.0 * binary_entropy(delta_l / 2.0)
    ivs = {
        "quantum": RateInterval(qmax, qmax + q_slack, q_ok),
        "private": RateInterval(qmax, qmax + q_slack, q_ok),
        "assisted": RateInterval(qmax, qmax + assisted_slack, q_ok),
        "classical": RateInterval(csum, csum + c_slack, c_ok),
        "ea": RateInterval(ceasum, ceasum + c_slack, c_ok),
    }
    rep = infinite_time_report(ps, "transmission")
    return CapacityReport(rep.block_dims, rep.q_inf, rep.p_inf, rep.c_inf,
                          rep.cea_inf, "transmission", ivs)


def blocklength_bounds(ps: PeripheralStructure, delta_l: float, n: int,
                       eps: float, alpha: float, d: int) -> CapacityReport:
    """Per-use rate intervals for n channel uses at error eps (Q and private),
    in the alpha-Renyi, max, and LOCC-assisted flavors."""
    if n < 1 or not (0.0 <= eps < 1.0) or alpha <= 1.0 or delta_l < 0.0:
        raise ValueError("need n >= 1, eps in [0,1), alpha > 1, delta_l >= 0")
    qmax, _, _ = _structure_logs(ps)
    ok = delta_l < 2.0
    aa = alpha / (alpha - 1.0)
    alpha_upper = (qmax
                   + aa * math.log2(1.0 + delta_l * d ** ((alpha - 1.0) / alpha) / 2.0)
                   + (aa / n) * math.log2(float(n) ** (d * d) / (1.0 - eps)))
    max_upper = (qmax + math.log2(1.0 + delta_l * d / 2.0)
                 + math.log2(1.0 / (1.0 - eps)) / n)
    ivs = {
        "quantum_alpha": RateInterval(qmax, alpha_upper, ok),
        "quantum_max": RateInterval(qmax, max_upper, ok),
        "private_alpha": RateInterval(qmax, alpha_upper, ok),
        "private_max": RateInterval(qmax, max_upper, ok),
        "assisted": RateInterval(qmax, max_upper, ok),
    }
    rep = infinite_time_report(ps, "blocklength")
    return CapacityReport(rep.block_dims, rep.q_inf, rep.p_inf, rep.c_inf,
                          rep.cea_inf, "blocklength", ivs)


def strong_additivity_bounds(ps: PeripheralStructure, delta_l: float,
                             d_a: int, d_c: int,
                             other: dict | None = None) -> CapacityReport:
    """Intervals for capacities of Psi^l ⊗ Γ given Γ's capacities, or the
    potential-capacity intervals when Γ's capacities are unknown (other=None,
    d_c = contextual output dimension q)."""
    if delta_l < 0.0:
        raise ValueError("delta_l must be nonnegative")
    qmax, csum, _ = _structure_logs(ps)
    dd = float(d_a * d_a * d_c * d_c)
    ok = delta_l / 2.0 <= 1.0 - 1.0 / dd
    base = delta_l * math.log2(dd - 1.0) + 2.0 * binary_entropy(delta_l / 2.0)
    oc = other.get("c", 0.0) if other else 0.0
    op = other.get("p", 0.0) if other else 0.0
    oq = other.get("q", 0.0) if other else 0.0
    ivs = {
        "classical": RateInterval(csum + oc, csum + oc + base, ok),
        "private": RateInterval(qmax + op, qmax + op + 2.0 * base, ok),
        "quantum": RateInterval(qmax + oq, qmax + oq + base, ok),
    }
    rep = infinite_time_report(ps, "additivity")
    return CapacityReport(rep.block_dims, rep.q_inf, rep.p_inf, rep.c_inf,
                          rep.cea_inf, "additivity", ivs)


def afw_bound(delta: float, dim: int) -> float:
    """Conditional-entropy continuity bound: delta*log(dim^2-1) + h(delta)
    when delta <= 1 - 1/dim^2, else the trivial cap log(dim^2)."""
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    if delta > 1.0 - 1.0 / (dim * dim):
        return math.log2(float(dim * dim))
    if dim * dim - 1 == 0:
        return 0.0
    return delta * math.log2(float(dim * dim - 1)) + binary_entropy(delta)


def continuity_bounds(delta: float, d_b: int) -> dict:
    """Capacity differences under a (half) diamond-norm perturbation delta."""
    base = afw_bound(delta, d_b)
    return {
        "c": 2.0 * base,
        "q": 2.0 * base,
        "cea": 2.0 * base,
        "p": 4.0 * base,
        "valid": delta <= 1.0 - 1.0 / (d_b * d_b),
    }


def e_max_pure(schmidt: list[float] | np.ndarray, tol: float = 1e-9) -> float:
    """Max-relative entropy of entanglement of a pure state:
    2 log2(sum_i sqrt(s_i)); never exceeds log2(len(schmidt))."""
    s = np.asarray(schmidt, dtype=float)
    if np.any(s < -tol) or abs(float(s.sum()) - 1.0) > tol:
        raise ValueError("Schmidt coefficients must be nonnegative and sum to 1")
    s = np.clip(s, 0.0, None)
    return float(2.0 * math.log2(float(np.sqrt(s).sum())))


# ---------------------------------------------------------------------------
# I_max of a channel (maximally entangled input), via a small SDP
# ---------------------------------------------------------------------------

def _max_entangled_choi_state(ch: Channel) -> np.ndarray:
    """(id ⊗ Phi)(psi+) = J / d with the input factor as the reference."""
    return ch.choi / ch.dim_in


def i_max_of_channel(ch: Channel, gap_tol: float = 1e-6) -> float:
    """I_max(Phi) in bits, with a certified primal/dual gap <= gap_tol.

    min Tr M s.t. rho <= (1_R/d) ⊗ M, M >= 0, with rho the Choi state;
    the dual max <rho, W> s.t. Tr_R W <= d·1, W >= 0 certifies from below.
    """
    d = ch.dim_in
    db = ch.dim_out
    rho = herm(_max_entangled_choi_state(ch))
    m_var = cp.Variable((db, db), hermitian=True)
    constraint_mat = cp.kron(np.eye(d) / d, m_var) - rho
    prob = cp.Problem(
        cp.Minimize(cp.real(cp.trace(m_var))),
        [constraint_mat >> 0, m_var >> 0],
    )
    try:
        prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200000, verbose=False)
    except cp.SolverError as exc:
        raise SolverNotConverged(str(exc)) from exc
    if m_var.value is None:
        raise SolverNotConverged(f"I_max SDP status {prob.status}")
    m_opt = herm(np.asarray(m_var.value))

    # certified upper bound: D_max against the feasible sigma = M / Tr M,
    # softened with a tiny full-rank admixture to dodge support issues
    tr_m = float(np.trace(m_opt).real)
    if tr_m <= 0:
        raise SolverNotConverged("I_max SDP produced nonpositive value")
    evals_m, vecs_m = np.linalg.eigh(m_opt)
    sigma = (vecs_m * np.clip(evals_m, 0.0, None)) @ dagger(vecs_m)
    sigma = sigma / np.trace(sigma).real
    sigma = (1.0 - 1e-11) * sigma + 1e-11 * np.eye(db) / db
    upper_bits = relative_entropy(DMAX, rho, np.kron(np.eye(d) / d, sigma))
    upper = 2.0 ** upper_bits

    # certified lower bound from a scaled PSD projection of the dual variable
    w = prob.constraints[0].dual_value
    lower = 0.0
    if w is not None:
        w = herm(np.asarray(w))
        evals_w, vecs_w = np.linalg.eigh(w)
        w = (vecs_w * np.clip(evals_w, 0.0, None)) @ dagger(vecs_w)
        tr_r = np.einsum("iaib->ab", w.reshape(d, db, d, db))
        top = float(np.linalg.eigvalsh(herm(tr_r)).max())
        # push W to the boundary of Tr_R W <= d*1: rescaling keeps feasibility
        # and can only help the objective
        scale = d / top if top > 0 else 0.0
        lower = float(np.trace(w @ rho).real) * scale
    lower = max(lower, 1e-300)
    gap = math.log2(upper) - math.log2(lower)
    if not (gap <= gap_tol or upper - lower <= gap_tol):
        raise SolverNotConverged(
            f"I_max duality gap {gap:.2e} bits exceeds {gap_tol:.1e}"
        )
    return float(upper_bits)
