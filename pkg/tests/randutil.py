"""Seeded random generators shared by the test suite."""

from __future__ import annotations

import numpy as np

from supermap_retro.channels import Channel, DensityMatrix
from supermap_retro.qmat import SystemDims, identity, kron, partial_trace, pinv_sqrt


def rand_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    a = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, _ = np.linalg.qr(a)
    return q[:, :cols]


def rand_state(rng: np.random.Generator, dims: SystemDims) -> DensityMatrix:
    d = dims.total
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = a @ a.conj().T + 0.05 * identity(d)
    return DensityMatrix(m / np.trace(m), dims)


def rand_channel(rng: np.random.Generator, in_dims: SystemDims, out_dims: SystemDims,
                 kraus_rank: int | None = None) -> Channel:
    """Random CPTP channel via a normalized random PSD Choi operator."""
    d_in, d_out = in_dims.total, out_dims.total
    k = kraus_rank if kraus_rank is not None else d_in * d_out
    a = rng.standard_normal((d_in * d_out, k)) + 1j * rng.standard_normal((d_in * d_out, k))
    g = a @ a.conj().T + 1e-6 * identity(d_in * d_out)
    tmp = in_dims.concat(out_dims.relabeled([f"o{k}" for k in range(len(out_dims))]))
    marg = partial_trace(g, tmp, tmp.labels[len(in_dims):])
    isq = pinv_sqrt(marg, tol=1e-14)
    c = kron(isq, identity(d_out)) @ g @ kron(isq, identity(d_out))
    return Channel(c, in_dims, out_dims)


def qubit(label: str = "X") -> SystemDims:
    return SystemDims((2,), (label,))


def two_qubits(l1: str = "Z", l2: str = "A") -> SystemDims:
    return SystemDims((2, 2), (l1, l2))
