"""Shared fixtures: zoo access, random channels, cached structure pipelines."""

from functools import lru_cache

import numpy as np
import pytest

import qmscap as q
from qmscap import codes as zoo_mod


ZOO_CASES = (
    ("identity", (("d", 2),)),
    ("identity", (("d", 3),)),
    ("depolarizing", (("p", 0.5),)),
    ("amplitude_damping", (("gamma", 0.5),)),
    ("dephasing", (("p", 0.3),)),
    ("correlated_pauli", (("n", 2),)),
    ("correlated_pauli", (("n", 3),)),
    ("random_mixed_unitary_twirl", (("n", 2), ("d", 2), ("seed", 5))),
    ("random_mixed_unitary_twirl", (("n", 3), ("d", 2), ("seed", 5))),
    ("random_channel", (("d", 3), ("kraus_count", 2), ("seed", 3))),
)


@lru_cache(maxsize=None)
def zoo_entry(name, params):
    return zoo_mod.zoo(name, **dict(params))


@lru_cache(maxsize=None)
def analyzed(name, params):
    """(channel, projector, structure-with-dynamics) for a zoo case."""
    entry = zoo_entry(name, params)
    ch = entry.channel
    proj = q.peripheral_projector(ch)
    ps = q.decompose_structure(ch, proj, np.random.default_rng(7))
    ps = q.extract_dynamics(ch, ps)
    return ch, proj, ps


@lru_cache(maxsize=None)
def reversal(name, params):
    ch, proj, ps = analyzed(name, params)
    return q.reversal_channel(ch, ps, proj)


@pytest.fixture(scope="session")
def zoo_cases():
    return ZOO_CASES


def random_peripheral_channel(rng, d_unitary=2, d_mix=2, kraus_mix=3):
    """Random channel with a guaranteed nontrivial periphery: a Haar unitary
    block direct-summed with a mixing block (block-diagonal Kraus family)."""
    from qmscap.chanrep import haar_unitary, random_channel, validate_channel

    u = haar_unitary(d_unitary, rng)
    mix = random_channel(d_mix, kraus_mix, rng)
    d = d_unitary + d_mix
    kraus = []
    probs = rng.dirichlet(np.ones(len(mix.kraus)))
    for c, n_j in zip(np.sqrt(probs), mix.kraus):
        k = np.zeros((d, d), dtype=complex)
        k[:d_unitary, :d_unitary] = c * u
        k[d_unitary:, d_unitary:] = n_j
        kraus.append(k)
    return validate_channel(kraus, 1e-9)
