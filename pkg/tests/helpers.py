"""Shared test helpers (importable because tests/ is on sys.path under pytest)."""

import numpy as np


def random_hermitian_psd(rng, B, scale=1.0, rank=None):
    rank = B if rank is None else rank
    a = rng.standard_normal((B, rank)) + 1j * rng.standard_normal((B, rank))
    return scale * (a @ a.conj().T) / rank


def random_unitary(rng, B):
    q, r = np.linalg.qr(rng.standard_normal((B, B)) + 1j * rng.standard_normal((B, B)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


# acceptance verdicts, printed by the terminal-summary hook in conftest
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
