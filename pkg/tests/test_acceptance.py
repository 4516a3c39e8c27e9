"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
"""

import math
import time

import numpy as np
import pytest

import qmscap as q
from qmscap.blockstruct import subspace_distance
from qmscap.capacity import DMIN, DivergenceKind, UMEGAKI, DMAX, infinite_time_report
from qmscap.chanrep import dagger, herm, to_transfer, unvec, validate_channel, vec
from qmscap.codes import collective_multiplicity_table, zoo
from qmscap.convergence import measured_delta_curve
from conftest import ZOO_CASES, analyzed, reversal, zoo_entry


def _report(num, desc):
    class _Ctx:
        def __enter__(self):
            self.t0 = time.monotonic()
            return self

        def __exit__(self, exc_type, exc, tb):
            dt = time.monotonic() - self.t0
            verdict = "PASS" if exc_type is None else "FAIL"
            print(f"\nACCEPTANCE {num:02d} [{desc}]: {verdict} ({dt:.2f}s)")
            return False
    return _Ctx()


def test_criterion_1_zoo_structure_table():
    with _report(1, "zoo structure table"):
        t0 = time.monotonic()
        for p in (0.1, 0.5, 0.9):
            _, _, ps = analyzed("depolarizing", (("p", p),))
            assert (ps.num_blocks, ps.block_dims) == (1, (1,))
        for g in (0.2, 0.8):
            _, _, ps = analyzed("amplitude_damping", (("gamma", g),))
            assert (ps.h0_dim, ps.num_blocks, ps.block_dims) == (1, 1, (1,))
        for p in (0.1, 0.9):
            _, _, ps = analyzed("dephasing", (("p", p),))
            assert (ps.num_blocks, ps.block_dims) == (2, (1, 1))
        for d in (2, 3):
            _, _, ps = analyzed("identity", (("d", d),))
            assert (ps.num_blocks, ps.block_dims) == (1, (d,))
        assert time.monotonic() - t0 < 1.0


def test_criterion_2_collective_decoherence_table():
    # As stated this criterion asserts the Schur-Weyl multiplicities
    # f(n-j,j), g(n-j,j) for the four-Kraus correlated Pauli family. That
    # table describes the commutant of the FULL collective algebra (all
    # M^{⊗n}), i.e. the twirl family; the Kraus algebra of the correlated
    # Pauli channel is only span{1, sx^n, sy^n, sz^n} (4-dim), whose
    # commutant is strictly larger (n=3 protects two qubits, not one).
    # The criterion is therefore expected to FAIL against a correct
    # decomposition; see the repository notes for the full analysis.
    with _report(2, "collective-decoherence table (known discrepancy)"):
        t0 = time.monotonic()
        for n in (2, 3, 4):
            _, _, ps = analyzed("correlated_pauli", (("n", n),))
            fs, gs = collective_multiplicity_table(n)
            assert sorted(ps.block_dims) == sorted(fs), (
                f"n={n}: block dims {sorted(ps.block_dims)} != Schur-Weyl "
                f"{sorted(fs)}; the table applies to collective rotations "
                f"(random_mixed_unitary_twirl), not to the four-Kraus family"
            )
            assert sorted(zip(ps.block_dims, ps.mult_dims)) == sorted(zip(fs, gs))
            if n == 3:
                assert max(ps.block_dims) == 2
            if n == 4:
                assert max(ps.block_dims) == 3
        assert time.monotonic() - t0 < 10.0


def test_criterion_2b_collective_table_holds_for_twirl():
    # companion check: the Schur-Weyl table does hold for the collective
    # twirl family, verified numerically for n = 2, 3
    with _report(2, "collective table on the twirl family (companion)"):
        for n in (2, 3):
            _, _, ps = analyzed("random_mixed_unitary_twirl",
                                (("n", n), ("d", 2), ("seed", 5)))
            fs, gs = collective_multiplicity_table(n)
            assert sorted(ps.block_dims) == sorted(fs)
            assert sorted(zip(ps.block_dims, ps.mult_dims)) == sorted(zip(fs, gs))


def test_criterion_3_zero_error_code_round_trip():
    with _report(3, "zero-error code round trip, t = 1..40"):
        t0 = time.monotonic()
        for name, params in ZOO_CASES:
            ch, _, ps = analyzed(name, params)
            rev = reversal(name, params)
            best = int(np.argmax(ps.block_dims))
            qc = q.build_quantum_code(ps, best, rev)
            cc = q.build_classical_code(ps)
            ea = q.build_ea_code(ps)
            dk = int(round(2 ** qc.log_dim))
            t_psi = to_transfer(ch)
            d = ch.dim_in
            t_pow = np.eye(d * d, dtype=complex)
            from qmscap.codes import (
                _entanglement_fidelity_from_transfer,
                _evolve_reference_system,
                _rect_transfer,
            )
            t_enc = _rect_transfer(qc.encoder)
            for t in range(1, 41):
                t_pow = t_psi @ t_pow
                dec = qc.decoder_builder(t)
                t_comp = _rect_transfer(dec) @ t_pow @ t_enc
                fid = _entanglement_fidelity_from_transfer(t_comp, dk)
                assert fid >= 1 - 1e-8, f"{name} t={t}: F_e = {fid}"
                povm = cc.decode_povm_builder(t)
                for m, rho in enumerate(cc.message_states):
                    out = unvec(t_pow @ vec(rho), d, d)
                    assert np.trace(povm[m] @ out).real >= 1 - 1e-8
                evolved = [_evolve_reference_system(t_pow, rho, ea.ref_dim, d)
                           for rho in ea.message_states]
                for a in range(len(evolved)):
                    for b in range(a + 1, len(evolved)):
                        assert abs(np.vdot(evolved[a].ravel(), evolved[b].ravel())) <= 1e-8
        assert time.monotonic() - t0 < 30.0


def test_criterion_4_operator_system_stabilization():
    with _report(4, "operator-system stabilization, 50 random channels"):
        t0 = time.monotonic()
        rng = np.random.default_rng(2024)
        done = 0
        while done < 50:
            d = int(rng.integers(2, 4))
            ch = q.random_channel(d, int(rng.integers(1, 4)), rng)
            if q.spectrum(ch).gap_margin < 0.05:
                continue  # tolerance coupling is undefined near criticality
            done += 1
            chain, l_stab = q.opsys_chain(ch)
            dims = [s.subspace_dim for s in chain]
            assert l_stab - 1 <= d * d - dims[0]
            proj = q.peripheral_projector(ch)
            s_proj = q.operator_system(proj.projector_channel)
            dist = subspace_distance(list(chain[-1].basis), list(s_proj.basis))
            assert dist <= 1e-7
        assert time.monotonic() - t0 < 60.0


def test_criterion_5_independence_multiplicativity():
    with _report(5, "independence-number multiplicativity, 20 pairs"):
        t0 = time.monotonic()
        from test_opsys import random_block_shape, random_star_algebra
        from qmscap.opsys import tensor_operator_system
        rng = np.random.default_rng(77)
        for _ in range(20):
            sa = random_star_algebra(random_block_shape(rng), rng)
            sb = random_star_algebra(random_block_shape(rng), rng)
            na = q.independence_numbers(q.algebra_block_structure(sa, rng))
            nb = q.independence_numbers(q.algebra_block_structure(sb, rng))
            nt = q.independence_numbers(
                q.algebra_block_structure(tensor_operator_system(sa, sb), rng))
            assert nt.alpha == na.alpha * nb.alpha
            assert nt.alpha_p == na.alpha_p * nb.alpha_p
            assert nt.alpha_q == na.alpha_q * nb.alpha_q
            assert nt.alpha_ea == na.alpha_ea * nb.alpha_ea
        assert time.monotonic() - t0 < 10.0


PAIR_POOL = [
    ("identity", (("d", 2),)),
    ("depolarizing", (("p", 0.5),)),
    ("amplitude_damping", (("gamma", 0.5),)),
    ("dephasing", (("p", 0.3),)),
    ("correlated_pauli", (("n", 2),)),
    ("random_mixed_unitary_twirl", (("n", 2), ("d", 2), ("seed", 5))),
]


def test_criterion_6_peripheral_multiplicativity():
    with _report(6, "peripheral multiplicativity, 10 zoo pairs"):
        t0 = time.monotonic()
        pairs = [(PAIR_POOL[i], PAIR_POOL[j])
                 for i in range(len(PAIR_POOL)) for j in range(i, len(PAIR_POOL))]
        pairs = [p for p in pairs
                 if zoo_entry(*p[0]).channel.dim_in * zoo_entry(*p[1]).channel.dim_in <= 8][:10]
        assert len(pairs) == 10
        rng = np.random.default_rng(5)
        for (n1, p1), (n2, p2) in pairs:
            ch1, _, ps1 = analyzed(n1, p1)
            ch2, _, ps2 = analyzed(n2, p2)
            prod = q.tensor(ch1, ch2)
            proj = q.peripheral_projector(prod)
            ps = q.decompose_structure(prod, proj, rng)
            expect = sorted(a * b for a in ps1.block_dims for b in ps2.block_dims)
            assert sorted(ps.block_dims) == expect
        assert time.monotonic() - t0 < 30.0


def test_criterion_7_convergence_soundness():
    with _report(7, "convergence soundness, t = 2..60"):
        t0 = time.monotonic()
        for name, params in [("depolarizing", (("p", 0.5),)),
                             ("amplitude_damping", (("gamma", 0.5),))]:
            ch, proj, _ = analyzed(name, params)
            rep = q.spectrum(ch)
            grid = [t for t in range(2, 61) if t > rep.mu / (1 - rep.mu)]
            curve = measured_delta_curve(ch, grid, proj=proj)
            for t, iv in curve:
                assert iv.lower <= iv.upper + 1e-12
                assert q.analytic_bound(t, rep.mu, ch.dim_in) >= iv.lower
            for delta in (0.1, 0.01):
                mu0 = 0.5 * (1 + rep.mu)
                t_thr = q.time_to_threshold(delta, rep.mu, mu0, ch.dim_in)
                assert q.analytic_bound(t_thr, rep.mu, ch.dim_in) <= delta
        assert time.monotonic() - t0 < 60.0


def test_criterion_8_divergence_suite():
    with _report(8, "divergence suite: DPI, D_H^0 = D_min, E_max"):
        t0 = time.monotonic()
        rng = np.random.default_rng(88)
        kinds = [UMEGAKI, DMAX, DMIN,
                 DivergenceKind("sandwiched", alpha=2.0),
                 DivergenceKind("hypothesis", eps=0.1)]

        def rand_state(d):
            g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            m = g @ dagger(g)
            return m / np.trace(m).real

        for _ in range(100):
            d = int(rng.integers(2, 4))
            ch = q.random_channel(d, int(rng.integers(1, 4)), rng)
            rho, sigma = rand_state(d), rand_state(d)
            out_r = herm(sum(k @ rho @ dagger(k) for k in ch.kraus))
            out_s = herm(sum(k @ sigma @ dagger(k) for k in ch.kraus))
            for kind in kinds:
                assert (q.relative_entropy(kind, out_r, out_s)
                        <= q.relative_entropy(kind, rho, sigma) + 1e-9)
        for _ in range(20):
            rd = rng.dirichlet(np.ones(3))
            sd = rng.dirichlet(np.ones(3))
            rho, sigma = np.diag(rd).astype(complex), np.diag(sd).astype(complex)
            dh0 = q.relative_entropy(DivergenceKind("hypothesis", eps=0.0), rho, sigma)
            dmin = q.relative_entropy(DMIN, rho, sigma)
            assert abs(dh0 - dmin) <= 1e-9
        assert abs(q.e_max_pure([0.5, 0.5]) - 1.0) < 1e-12
        assert time.monotonic() - t0 < 30.0


def test_criterion_9_bound_evaluator_collapse():
    with _report(9, "bound-evaluator collapse and blocklength monotonicity"):
        t0 = time.monotonic()
        for name, params in [("identity", (("d", 2),)), ("dephasing", (("p", 0.3),)),
                             ("correlated_pauli", (("n", 3),))]:
            ch, proj, ps = analyzed(name, params)
            inf_rep = infinite_time_report(ps)
            zr = q.zero_error_capacities(ch, ps, proj)
            assert zr.c0 == inf_rep.c_inf
            assert zr.q0 == zr.p0 == inf_rep.q_inf
            assert zr.cea0 == inf_rep.cea_inf
            st_rep = q.storage_bounds(ps, 0.0, 0.0)
            tr = q.transmission_bounds(ps, 0.0, 2.0, ch.dim_in)
            bl1 = q.blocklength_bounds(ps, 0.0, 1, 0.0, 2.0, ch.dim_in)
            for key in ("quantum", "private"):
                assert st_rep.intervals[key].lower == st_rep.intervals[key].upper == inf_rep.q_inf
                assert tr.intervals[key].lower == tr.intervals[key].upper == inf_rep.q_inf
            assert st_rep.intervals["classical"].upper == inf_rep.c_inf
            assert st_rep.intervals["ea"].upper == inf_rep.cea_inf
            assert bl1.intervals["quantum_alpha"].upper == inf_rep.q_inf
            assert bl1.intervals["assisted"].upper == inf_rep.q_inf
            # monotone approach over n = 1..2^10 at finite delta
            prev = math.inf
            tr_fin = q.transmission_bounds(ps, 0.05, 2.0, ch.dim_in)
            for k in range(11):
                bl = q.blocklength_bounds(ps, 0.05, 2 ** k, 0.1, 2.0, ch.dim_in)
                up = bl.intervals["quantum_max"].upper
                assert up <= prev + 1e-12
                prev = up
            assert prev >= tr_fin.intervals["assisted"].upper - 1e-12
        assert time.monotonic() - t0 < 5.0


def test_criterion_10_lifetime_bounds():
    with _report(10, "memory-lifetime formula checks on d = 2, 4"):
        # trivial periphery: finite lifetime; unitary noise: never useless
        for d in (2, 4):
            entry = zoo("depolarizing", p=0.5, d=d)
            ch = entry.channel
            proj = q.peripheral_projector(ch)
            ps = q.decompose_structure(ch, proj, np.random.default_rng(7))
            mu = q.spectral_gap(ch)
            life = q.memory_lifetime_bound(ps, 0.25, mu, t_grid=[1, 10, 200])
            assert life.t_useless is not None and life.t_useless >= 1
            assert life.ceiling_bits == pytest.approx(1.0)
            assert life.curve[-1][1] <= life.ceiling_bits + 1e-6
        u = np.diag(np.exp(1j * np.array([0.1, -0.7]))).astype(complex)
        noise = validate_channel([u])
        ecc = validate_channel([dagger(u)])
        comp = q.compose(ecc, noise)
        proj = q.peripheral_projector(comp)
        ps = q.decompose_structure(comp, proj, np.random.default_rng(7))
        life = q.memory_lifetime_bound(ps, 0.25, q.spectral_gap(comp))
        assert life.t_useless is None
        # local error correction: lifetime grows like ln(copies)
        _, _, ps_triv = analyzed("depolarizing", (("p", 0.5),))
        ts = [q.memory_lifetime_bound(ps_triv, 0.25, 0.5, iid_copies=m,
                                      local_dim=2).t_useless
              for m in (4, 16, 64)]
        assert ts[0] < ts[1] < ts[2]
        assert abs((ts[2] - ts[1]) - (ts[1] - ts[0])) <= 2
