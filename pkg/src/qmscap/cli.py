"""Command-line front end.

Subcommands: analyze | converge | opsys | simulate | zoo-list.
Exit codes: 0 ok, 1 usage error, 2 data error, 3 numerical failure.
All randomness funnels through --seed; identical config + seed gives
byte-identical outputs (atomic write-temp-rename, sorted keys).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import blockstruct, capacity, chanrep, codes, convergence, opsys, spectral
from .errors import (
    DimensionMismatch,
    NotTracePreserving,
    NotCompletelyPositive,
    QmscapError,
    UnknownChannel,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DATA_ERRORS = (DimensionMismatch, NotTracePreserving, NotCompletelyPositive,
               UnknownChannel, json.JSONDecodeError, FileNotFoundError, ValueError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(path: str, obj) -> None:
    _write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _parse_zoo_spec(spec: str) -> codes.ChannelZooEntry:
    if ":" in spec:
        name, argstr = spec.split(":", 1)
        params = {}
        for item in argstr.split(","):
            if not item:
                continue
            key, _, value = item.partition("=")
            if not _:
                raise ValueError(f"malformed zoo parameter {item!r}")
            params[key] = value
        return codes.zoo(name, **params)
    return codes.zoo(spec)


def _load_channel(args) -> tuple[chanrep.Channel, str]:
    if args.zoo and args.input:
        raise ValueError("pass either --zoo or --input, not both")
    if args.zoo:
        entry = _parse_zoo_spec(args.zoo)
        return entry.channel, args.zoo
    if args.input:
        with open(args.input) as fh:
            return chanrep.channel_from_json(json.load(fh), tol=args.tol), args.input
    raise ValueError("one of --zoo or --input is required")


def _parse_tgrid(spec: str) -> list[int]:
    a, _, b = spec.partition("..")
    if not _:
        raise ValueError("tgrid must be of the form A..B")
    lo, hi = int(a), int(b)
    if lo < 1 or hi < lo:
        raise ValueError("tgrid bounds must satisfy 1 <= A <= B")
    return list(range(lo, hi + 1))


def _structure_pipeline(ch, seed: int, strict: bool):
    rng = np.random.default_rng(seed)
    proj = spectral.peripheral_projector(ch, strict=strict)
    ps = blockstruct.decompose_structure(ch, proj, rng)
    ps = blockstruct.extract_dynamics(ch, ps)
    return proj, ps


def cmd_analyze(args) -> int:
    ch, label = _load_channel(args)
    rep = spectral.spectrum(ch, strict=args.strict)
    proj, ps = _structure_pipeline(ch, args.seed, args.strict)
    zr = opsys.zero_error_capacities(ch, ps, proj,
                                     rng=np.random.default_rng(args.seed + 1))
    storage = capacity.storage_bounds(ps, args.eps, 0.0)
    transmission = capacity.transmission_bounds(ps, 0.0, args.alpha, ch.dim_in)
    blocklength = capacity.blocklength_bounds(ps, 0.0, args.n, args.eps,
                                              args.alpha, ch.dim_in)
    out = args.out
    _dump_json(os.path.join(out, "spectrum.json"), rep.to_json())
    _dump_json(os.path.join(out, "structure.json"), ps.to_json())
    _dump_json(os.path.join(out, "capacities.json"), {
        "schema": "1",
        "channel": label,
        "zero_error": zr.to_json(),
        "infinite_time": capacity.infinite_time_report(ps).to_json(),
        "storage": storage.to_json(),
        "transmission": transmission.to_json(),
        "blocklength": blocklength.to_json(),
    })
    return EXIT_OK


def cmd_converge(args) -> int:
    if args.tgrid is None:
        raise _UsageError("converge requires --tgrid")
    ch, label = _load_channel(args)
    if not ch.is_square:
        raise DimensionMismatch("converge requires a square channel")
    grid = _parse_tgrid(args.tgrid)
    delta = args.eps if args.eps > 0 else 0.01
    report = convergence.convergence_report(ch, grid, delta=delta, seed=args.seed)
    proj, ps = _structure_pipeline(ch, args.seed, args.strict)
    mu = report.mu
    mu0 = 0.5 * (1.0 + mu)
    thresholds = {
        "schema": "1",
        "channel": label,
        "mu": mu,
        "delta": delta,
        "t_threshold": report.t_threshold,
        "iid_thresholds": {},
        "lifetime": None,
    }
    if args.n > 1 and mu > 0:
        thresholds["iid_thresholds"][str(args.n)] = convergence.iid_time_to_threshold(
            args.n, ch.dim_in, mu, mu0, delta)
    eps_mem = min(args.eps, 0.49) if args.eps > 0 else 0.25
    life = convergence.memory_lifetime_bound(ps, eps_mem, mu, t_grid=grid)
    thresholds["lifetime"] = life.to_json()
    _dump_json(os.path.join(args.out, "thresholds.json"), thresholds)
    _write_atomic(os.path.join(args.out, "convergence.csv"), report.to_csv())
    return EXIT_OK


def cmd_opsys(args) -> int:
    ch, label = _load_channel(args)
    chain, l_stab = opsys.opsys_chain(ch)
    proj, ps = _structure_pipeline(ch, args.seed, args.strict)
    zr = opsys.zero_error_capacities(ch, ps, proj,
                                     rng=np.random.default_rng(args.seed + 1))
    _dump_json(os.path.join(args.out, "chain.json"), {
        "schema": "1",
        "channel": label,
        "dims": [s.subspace_dim for s in chain],
        "stabilization_index": l_stab,
    })
    _dump_json(os.path.join(args.out, "stabilized.json"), chain[-1].to_json())
    _dump_json(os.path.join(args.out, "zero_error.json"), zr.to_json())
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.tgrid is None:
        raise _UsageError("simulate requires --tgrid")
    ch, label = _load_channel(args)
    grid = _parse_tgrid(args.tgrid)
    proj, ps = _structure_pipeline(ch, args.seed, args.strict)
    rev = blockstruct.reversal_channel(ch, ps, proj)
    best = int(np.argmax(ps.block_dims))
    qc = codes.build_quantum_code(ps, best, rev)
    cc = codes.build_classical_code(ps)
    ea = codes.build_ea_code(ps)
    lines = ["t,ent_fidelity,worst_est,success_prob,ea_success_prob"]
    for t in grid:
        q = codes.evaluate_code(ch, qc, t)
        c = codes.evaluate_code(ch, cc, t)
        e = codes.evaluate_code(ch, ea, t)
        lines.append(
            f"{t},{q['entanglement_fidelity']:.12g},{q['worst_case_estimate']:.12g},"
            f"{c['success_prob']:.12g},{e['success_prob']:.12g}"
        )
    _write_atomic(os.path.join(args.out, "fidelity.csv"), "\n".join(lines) + "\n")
    _dump_json(os.path.join(args.out, "codes.json"), {
        "schema": "1",
        "channel": label,
        "quantum_code_bits": qc.log_dim,
        "classical_code_bits": cc.log_size,
        "ea_code_bits": ea.log_size,
        "encoder": chanrep.channel_to_json(qc.encoder),
        "decoder_t1": chanrep.channel_to_json(qc.decoder_builder(1)),
    })
    return EXIT_OK


def cmd_zoo_list(args) -> int:
    out = {
        "schema": "1",
        "channels": {
            "identity": "d",
            "depolarizing": "p, d",
            "amplitude_damping": "gamma",
            "dephasing": "p (complex, |p| < 1)",
            "correlated_pauli": "n, p0, px, py, pz",
            "random_channel": "d, kraus_count, seed",
            "random_mixed_unitary_twirl": "n, d, seed",
        },
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> _Parser:
    p = _Parser(prog="qmscap", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--input", help="path to channel JSON")
        sp.add_argument("--zoo", help="zoo spec NAME:k=v,... (see zoo-list)")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--tgrid", help="time grid A..B")
        sp.add_argument("--eps", type=float, default=0.0,
                        help="error budget; for converge, the diamond-norm threshold delta")
        sp.add_argument("--alpha", type=float, default=2.0)
        sp.add_argument("--n", type=int, default=1)
        sp.add_argument("--out", default=".")
        sp.add_argument("--seed", type=int, default=2024)
        sp.add_argument("--strict", action="store_true")

    for name, fn in (("analyze", cmd_analyze), ("converge", cmd_converge),
                     ("opsys", cmd_opsys), ("simulate", cmd_simulate),
                     ("zoo-list", cmd_zoo_list)):
        sp = sub.add_parser(name)
        common(sp)
        sp.set_defaults(func=fn)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        _emit_error(args, exc)
        return EXIT_DATA
    except (QmscapError, np.linalg.LinAlgError) as exc:
        _emit_error(args, exc)
        return EXIT_NUMERIC


def _emit_error(args, exc) -> None:
    payload = {"schema": "1", "error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    out = getattr(args, "out", None)
    if out:
        try:
            _dump_json(os.path.join(out, "error.json"), payload)
        except OSError:
            pass


if __name__ == "__main__":
    sys.exit(main())
