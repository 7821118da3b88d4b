"""Dense complex-matrix kernel: tensor products, partial traces, system
permutations, and Hermitian matrix functions.

Matrices are plain ``numpy.ndarray`` objects (complex128, row-major).
Multipartite operators carry their tensor-factor structure in a separate
:class:`SystemDims` value; nothing is ever reshaped implicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence

import numpy as np

# Hermiticity violations beyond this are treated as data errors, below it the
# matrix is symmetrized before eigendecomposition.
HERM_TOL = 1e-12
# Default clamp threshold for almost-PSD eigenvalues.
PSD_TOL = 1e-9


class QmatError(ValueError):
    """Raised on malformed matrices, dimensions, or labels."""


@dataclass(frozen=True)
class SystemDims:
    """Ordered tensor-factor dimensions with unique labels."""

    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if len(self.dims) != len(self.labels):
            raise QmatError("dims and labels must have equal length")
        if any(d <= 0 for d in self.dims):
            raise QmatError(f"dimensions must be positive, got {self.dims}")
        if len(set(self.labels)) != len(self.labels):
            raise QmatError(f"labels must be unique, got {self.labels}")

    @property
    def total(self) -> int:
        return prod(self.dims)

    def __len__(self) -> int:
        return len(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise QmatError(f"unknown system label {label!r}; have {self.labels}") from None

    def positions(self, labels: Iterable[str]) -> list[int]:
        return [self.index(s) for s in labels]

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]

    def drop(self, labels: Iterable[str]) -> "SystemDims":
        gone = set(labels)
        for s in gone:
            self.index(s)
        keep = [k for k, s in enumerate(self.labels) if s not in gone]
        return SystemDims(tuple(self.dims[k] for k in keep), tuple(self.labels[k] for k in keep))

    def permuted(self, new_order: Sequence[str]) -> "SystemDims":
        perm = self.positions(new_order)
        if sorted(perm) != list(range(len(self))):
            raise QmatError(f"{tuple(new_order)} is not a permutation of {self.labels}")
        return SystemDims(tuple(self.dims[k] for k in perm), tuple(new_order))

    def concat(self, other: "SystemDims") -> "SystemDims":
        return SystemDims(self.dims + other.dims, self.labels + other.labels)

    def relabeled(self, new_labels: Sequence[str]) -> "SystemDims":
        return SystemDims(self.dims, tuple(new_labels))


def as_cmatrix(m: np.ndarray) -> np.ndarray:
    """Coerce to a finite, 2-D complex array."""
    arr = np.ascontiguousarray(m, dtype=complex)
    if arr.ndim != 2:
        raise QmatError(f"expected a matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise QmatError("matrix contains non-finite entries")
    return arr


def _check_square(m: np.ndarray, dims: SystemDims) -> np.ndarray:
    m = as_cmatrix(m)
    if m.shape != (dims.total, dims.total):
        raise QmatError(f"matrix shape {m.shape} inconsistent with dims {dims.dims}")
    return m


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the left factor on the slow (first) index."""
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def kron_all(*ms: np.ndarray) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in ms:
        out = np.kron(out, as_cmatrix(m))
    return out


def partial_trace(m: np.ndarray, dims: SystemDims, traced: Iterable[str]) -> np.ndarray:
    """Trace out the named tensor factors; remaining factor order is preserved."""
    m = _check_square(m, dims)
    traced = list(traced)
    pos = set(dims.positions(traced))
    if len(pos) != len(traced):
        raise QmatError(f"repeated labels in traced set {traced}")
    n = len(dims)
    t = m.reshape(dims.dims + dims.dims)
    row_sub = list(range(n))
    col_sub = [k if k in pos else n + k for k in range(n)]
    out_sub = [k for k in range(n) if k not in pos] + [n + k for k in range(n) if k not in pos]
    keep_dim = prod(d for k, d in enumerate(dims.dims) if k not in pos)
    out = np.einsum(t, row_sub + col_sub, out_sub)
    return np.ascontiguousarray(out.reshape(keep_dim, keep_dim))


def permute_systems(m: np.ndarray, dims: SystemDims, new_order: Sequence[str]) -> np.ndarray:
    """Conjugate by the tensor-factor permutation taking ``dims`` to ``new_order``."""
    m = _check_square(m, dims)
    perm = dims.positions(new_order)
    if sorted(perm) != list(range(len(dims))):
        raise QmatError(f"{tuple(new_order)} is not a permutation of {dims.labels}")
    n = len(dims)
    t = m.reshape(dims.dims + dims.dims)
    t = t.transpose(perm + [n + k for k in perm])
    return np.ascontiguousarray(t.reshape(dims.total, dims.total))


def hermitize(m: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    """Symmetrize ``(m + m†)/2`` after checking the violation is below ``tol``."""
    m = as_cmatrix(m)
    viol = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if viol > tol:
        raise QmatError(f"matrix is not Hermitian: max|m - m†| = {viol:.3e} > {tol:.1e}")
    return (m + m.conj().T) / 2


def herm_sqrt(m: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """PSD square root via eigendecomposition.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything below ``-tol``
    signals a genuinely non-PSD input and raises.
    """
    h = hermitize(m, tol=max(tol, HERM_TOL))
    w, v = np.linalg.eigh(h)
    if w.size and w[0] < -tol:
        raise QmatError(f"matrix is not PSD: min eigenvalue {w[0]:.3e} < -{tol:.1e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def pinv_sqrt(m: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Inverse square root on the support; eigenvalues below ``tol`` map to 0."""
    h = hermitize(m, tol=max(tol, HERM_TOL))
    w, v = np.linalg.eigh(h)
    inv = np.where(w > tol, 1.0 / np.sqrt(np.clip(w, tol, None)), 0.0)
    return (v * inv) @ v.conj().T


def min_eigval(m: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetrized matrix part."""
    m = as_cmatrix(m)
    h = (m + m.conj().T) / 2
    return float(np.linalg.eigvalsh(h)[0])


def frobenius(m: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(m)))


def identity(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex)


def basis_vector(d: int, k: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[k] = 1.0
    return v


def max_entangled_vector(d: int) -> np.ndarray:
    """Unnormalized pairing vector sum_i |ii> of length d*d."""
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1.0
    return v


# --- shared JSON matrix format --------------------------------------------
#
# {"dims": [ints], "labels": [strings], "rows": [[[re, im], ...], ...]}
#
# Round-trips bit-exactly at double precision: json emits repr() of floats.


def matrix_to_json(m: np.ndarray, dims: SystemDims) -> dict:
    m = _check_square(m, dims)
    rows = [[[float(x.real), float(x.imag)] for x in row] for row in m]
    return {"dims": list(dims.dims), "labels": list(dims.labels), "rows": rows}


def matrix_from_json(obj: dict) -> tuple[np.ndarray, SystemDims]:
    try:
        dims = SystemDims(tuple(obj["dims"]), tuple(obj["labels"]))
        rows = obj["rows"]
    except (KeyError, TypeError) as exc:
        raise QmatError(f"malformed matrix object: {exc}") from exc
    m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    return _check_square(m, dims), dims


def save_matrix(path: str, m: np.ndarray, dims: SystemDims) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(matrix_to_json(m, dims), fh)


def load_matrix(path: str) -> tuple[np.ndarray, SystemDims]:
    with open(path, "r", encoding="utf-8") as fh:
        return matrix_from_json(json.load(fh))
