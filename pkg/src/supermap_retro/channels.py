"""States, channels, and instruments in the Choi representation.

Conventions, fixed repo-wide:

* The Choi operator of a map ``N`` is unnormalized and input-first::

      C_N = sum_ij |i><j|_in  (x)  N(|i><j|)_out

* Application reads ``N(rho) = Tr_in[(rho^T (x) 1_out) C_N]``.

Both are exercised against independent Kraus-based oracles in the test
suite; every routine below assumes them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qmat import (
    QmatError,
    SystemDims,
    as_cmatrix,
    basis_vector,
    herm_sqrt,
    hermitize,
    identity,
    kron,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    permute_systems,
)

VALIDATION_TOL = 1e-9

# Eigenbases of the three Pauli operators; the input-state set used for
# fidelity averaging in the error-correction experiments.
PAULI_EIGENSTATES: tuple[np.ndarray, ...] = tuple(
    np.array(v, dtype=complex) / np.linalg.norm(v)
    for v in ([1, 0], [0, 1], [1, 1], [1, -1], [1, 1j], [1, -1j])
)


def _single(label: str, d: int) -> SystemDims:
    return SystemDims((d,), (label,))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD, unit-trace operator with its tensor-factor structure."""

    mat: np.ndarray
    dims: SystemDims

    def __post_init__(self) -> None:
        m = as_cmatrix(self.mat)
        if m.shape != (self.dims.total, self.dims.total):
            raise QmatError(f"state shape {m.shape} inconsistent with dims {self.dims.dims}")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise QmatError("state is not Hermitian at 1e-10")
        w = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if w[0] < -1e-9:
            raise QmatError(f"state has negative eigenvalue {w[0]:.3e}")
        if abs(np.trace(m) - 1.0) > 1e-10:
            raise QmatError(f"state trace {np.trace(m):.12f} differs from 1")
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.dims.total

    @classmethod
    def from_vector(cls, vec: np.ndarray, dims: SystemDims | None = None) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        if dims is None:
            dims = _single("X", v.size)
        return cls(np.outer(v, v.conj()), dims)

    @classmethod
    def maximally_mixed(cls, dims: SystemDims) -> "DensityMatrix":
        d = dims.total
        return cls(identity(d) / d, dims)


@dataclass(frozen=True)
class Channel:
    """CPTP map stored as an unnormalized Choi operator (input factor first)."""

    choi: np.ndarray
    in_dims: SystemDims
    out_dims: SystemDims

    def __post_init__(self) -> None:
        c = as_cmatrix(self.choi)
        d = self.in_dims.total * self.out_dims.total
        if c.shape != (d, d):
            raise QmatError(
                f"Choi shape {c.shape} inconsistent with dims {self.in_dims.dims}x{self.out_dims.dims}"
            )
        object.__setattr__(self, "choi", c)

    @property
    def d_in(self) -> int:
        return self.in_dims.total

    @property
    def d_out(self) -> int:
        return self.out_dims.total

    @property
    def full_dims(self) -> SystemDims:
        return self.in_dims.concat(self.out_dims)


@dataclass(frozen=True)
class ChannelReport:
    """Validation diagnostics for one Choi operator."""

    herm_violation: float
    min_eigval: float
    tp_residual: float
    ok: bool

    def as_dict(self) -> dict:
        return {
            "herm_violation": self.herm_violation,
            "min_eigval": self.min_eigval,
            "tp_residual": self.tp_residual,
            "ok": self.ok,
        }


def validate_channel(ch: Channel, tol: float = VALIDATION_TOL) -> ChannelReport:
    """Check Hermiticity, complete positivity, and trace preservation."""
    c = ch.choi
    herm = float(np.max(np.abs(c - c.conj().T)))
    w = np.linalg.eigvalsh((c + c.conj().T) / 2)
    mineig = float(w[0])
    marg = partial_trace(c, ch.full_dims, ch.out_dims.labels)
    tp = float(np.max(np.abs(marg - identity(ch.d_in))))
    ok = herm <= tol and mineig >= -tol and tp <= tol
    return ChannelReport(herm, mineig, tp, ok)


def choi_of_kraus(
    kraus: Sequence[np.ndarray],
    in_dims: SystemDims | None = None,
    out_dims: SystemDims | None = None,
    tol: float = VALIDATION_TOL,
) -> Channel:
    """Assemble the Choi operator of ``rho -> sum_k K rho K†``.

    Raises when the Kraus set is not trace preserving at ``tol``.
    """
    ks = [as_cmatrix(k) for k in kraus]
    if not ks:
        raise QmatError("empty Kraus set")
    d_out, d_in = ks[0].shape
    if any(k.shape != (d_out, d_in) for k in ks):
        raise QmatError("Kraus operators must share one shape")
    comp = sum(k.conj().T @ k for k in ks)
    if np.max(np.abs(comp - identity(d_in))) > tol:
        raise QmatError("Kraus set is not trace preserving")
    c = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in ks:
        # (1 (x) K) |Omega> with |Omega> = sum_i |i>|i> gives vec with block i = K|i>.
        w = k.T.reshape(-1)
        c += np.outer(w, w.conj())
    in_dims = in_dims if in_dims is not None else _single("X", d_in)
    out_dims = out_dims if out_dims is not None else _single("Y", d_out)
    return Channel(c, in_dims, out_dims)


def kraus_of_choi(ch: Channel, tol: float = VALIDATION_TOL) -> list[np.ndarray]:
    """Kraus operators by Choi eigendecomposition.

    Eigenvalues below ``tol`` relative to the largest are dropped, so the
    number of returned operators is the Choi rank at that threshold.
    """
    c = hermitize(ch.choi, tol=1e-8)
    w, v = np.linalg.eigh(c)
    if w.size == 0:
        return []
    cutoff = tol * max(float(w[-1]), 0.0)
    ops = []
    for k in range(w.size):
        if w[k] > cutoff:
            vec = np.sqrt(w[k]) * v[:, k]
            ops.append(vec.reshape(ch.d_in, ch.d_out).T.copy())
    return ops


def apply_to_matrix(ch: Channel, m: np.ndarray) -> np.ndarray:
    """Linear action of the channel on an arbitrary input-space operator."""
    m = as_cmatrix(m)
    if m.shape != (ch.d_in, ch.d_in):
        raise QmatError(f"operator shape {m.shape} does not match channel input {ch.d_in}")
    t = ch.choi.reshape(ch.d_in, ch.d_out, ch.d_in, ch.d_out)
    return np.einsum("ij,iajb->ab", m, t)


def apply(ch: Channel, rho: DensityMatrix) -> DensityMatrix:
    """Apply a channel to a state; the output is validated as a state."""
    if rho.dim != ch.d_in:
        raise QmatError(f"state dim {rho.dim} does not match channel input {ch.d_in}")
    return DensityMatrix(apply_to_matrix(ch, rho.mat), ch.out_dims)


def compose_channels(after: Channel, before: Channel) -> Channel:
    """Choi operator of ``after ∘ before``."""
    if before.d_out != after.d_in:
        raise QmatError("channel composition dimension mismatch")
    d_in = before.d_in
    c = np.zeros((d_in * after.d_out, d_in * after.d_out), dtype=complex)
    t = c.reshape(d_in, after.d_out, d_in, after.d_out)
    for i in range(d_in):
        for j in range(d_in):
            e = np.zeros((d_in, d_in), dtype=complex)
            e[i, j] = 1.0
            t[i, :, j, :] = apply_to_matrix(after, apply_to_matrix(before, e))
    return Channel(c, before.in_dims, after.out_dims)


def fresh_labels(labels: Sequence[str], taken: Sequence[str]) -> tuple[str, ...]:
    """Suffix apostrophes until every label avoids the taken set."""
    used = set(taken)
    out = []
    for s in labels:
        t = s
        while t in used:
            t += "'"
        used.add(t)
        out.append(t)
    return tuple(out)


def tensor_channels(a: Channel, b: Channel) -> Channel:
    """Choi operator of ``a (x) b`` with inputs and outputs grouped."""
    prod = kron(a.choi, b.choi)
    la = [f"a.{s}" for s in a.full_dims.labels]
    lb = [f"b.{s}" for s in b.full_dims.labels]
    dims = a.full_dims.relabeled(la).concat(b.full_dims.relabeled(lb))
    n_a, n_b = len(a.in_dims), len(b.in_dims)
    order = la[:n_a] + lb[:n_b] + la[n_a:] + lb[n_b:]
    c = permute_systems(prod, dims, order)
    taken = list(a.full_dims.labels)
    b_in = fresh_labels(b.in_dims.labels, taken)
    b_out = fresh_labels(b.out_dims.labels, list(taken) + list(b_in))
    in_dims = a.in_dims.concat(b.in_dims.relabeled(b_in))
    out_dims = a.out_dims.concat(b.out_dims.relabeled(b_out))
    return Channel(c, in_dims, out_dims)


def identity_channel(dims: SystemDims) -> Channel:
    d = dims.total
    w = identity(d).reshape(-1)
    return Channel(np.outer(w, w.conj()), dims, dims.relabeled([f"{s}'" for s in dims.labels]))


def unitary_channel(u: np.ndarray, in_dims: SystemDims | None = None,
                    out_dims: SystemDims | None = None, tol: float = 1e-10) -> Channel:
    u = as_cmatrix(u)
    if u.shape[0] != u.shape[1] or np.max(np.abs(u @ u.conj().T - identity(u.shape[0]))) > tol:
        raise QmatError("matrix is not unitary at 1e-10")
    d = u.shape[0]
    in_dims = in_dims if in_dims is not None else _single("X", d)
    out_dims = out_dims if out_dims is not None else _single("Y", d)
    return choi_of_kraus([u], in_dims, out_dims)


def trace_out_channel(dims: SystemDims, traced: Sequence[str]) -> Channel:
    """The partial-trace channel over the named factors."""
    keep = dims.drop(traced)
    ops = []
    # Kraus operators 1_keep (x) <a| for each traced basis state, reordered to dims.
    perm_target = list(keep.labels) + list(traced)
    traced_dims = SystemDims(tuple(dims.dim_of(s) for s in traced), tuple(traced))
    d_tr = traced_dims.total
    reorder = _permutation_matrix(dims, perm_target)
    for a in range(d_tr):
        bra = basis_vector(d_tr, a).conj()[None, :]
        ops.append(kron(identity(keep.total), bra) @ reorder)
    return choi_of_kraus(ops, dims, keep.relabeled([f"{s}'" for s in keep.labels]))


def _permutation_matrix(dims: SystemDims, new_order: Sequence[str]) -> np.ndarray:
    """Unitary P with P |i_1 ... i_n, dims order> = |..., new order>."""
    perm = dims.positions(new_order)
    d = dims.total
    t = identity(d).reshape(dims.dims + (d,))
    t = t.transpose(perm + [len(dims)])
    return np.ascontiguousarray(t.reshape(d, d))


def depolarizing(p: float, dims: SystemDims) -> Channel:
    """Convex mixture of the identity channel and the constant map to 1/d."""
    if not 0.0 <= p <= 1.0:
        raise QmatError(f"depolarizing strength must be in [0, 1], got {p}")
    d = dims.total
    ident = identity_channel(dims)
    c = (1.0 - p) * ident.choi + (p / d) * identity(d * d)
    return Channel(c, ident.in_dims, ident.out_dims)


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def prior_gamma(p: float, u_gamma: np.ndarray, tol: float = 1e-10) -> Channel:
    """One-qubit-to-two-qubit prior: append |0>, apply ``u_gamma``, depolarize.

    ``rho -> D_p(U (rho (x) |0><0|) U†)`` with input X and output (Z, A).
    """
    u = as_cmatrix(u_gamma)
    if u.shape != (4, 4) or np.max(np.abs(u @ u.conj().T - identity(4))) > tol:
        raise QmatError("u_gamma must be a 4x4 unitary")
    if not 0.0 <= p <= 1.0:
        raise QmatError(f"noise strength must be in [0, 1], got {p}")
    out_dims = SystemDims((2, 2), ("Z", "A"))
    iso = u @ kron(identity(2), basis_vector(2, 0)[:, None])
    clean = choi_of_kraus([iso], _single("X", 2), out_dims)
    noisy = compose_channels(depolarizing(p, out_dims), clean)
    return Channel(noisy.choi, _single("X", 2), out_dims)


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity ``Tr[sqrt(sqrt(a) b sqrt(a))]^2``."""
    if a.dim != b.dim:
        raise QmatError("fidelity requires equal dimensions")
    ra = herm_sqrt(a.mat)
    inner = hermitize(ra @ b.mat @ ra, tol=1e-8)
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    val = float(np.sum(np.sqrt(w)) ** 2)
    return min(val, 1.0 + 1e-9)


@dataclass(frozen=True)
class Instrument:
    """Collection of CP branches (Choi operators) summing to a channel."""

    branches: tuple[np.ndarray, ...]
    in_dims: SystemDims
    out_dims: SystemDims

    def __post_init__(self) -> None:
        object.__setattr__(self, "branches", tuple(as_cmatrix(b) for b in self.branches))

    def total(self) -> Channel:
        return Channel(sum(self.branches), self.in_dims, self.out_dims)

    def branch_channel_action(self, k: int, m: np.ndarray) -> np.ndarray:
        ch = Channel(self.branches[k], self.in_dims, self.out_dims)
        return apply_to_matrix(ch, m)


def instrument_phi(phi: np.ndarray, tol: float = 1e-10) -> Instrument:
    """Two-branch instrument projecting onto ``phi`` and onto its complement.

    The branch sum is the channel that destroys coherence between the two
    subspaces.
    """
    v = np.asarray(phi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise QmatError("phi must be normalized")
    d = v.size
    proj = np.outer(v, v.conj())
    comp = identity(d) - proj
    dims_in = _single("A", d)
    dims_out = _single("A'", d)
    j1 = choi_of_kraus_unchecked([proj], dims_in, dims_out)
    j0 = choi_of_kraus_unchecked([comp], dims_in, dims_out)
    return Instrument((j1, j0), dims_in, dims_out)


def choi_of_kraus_unchecked(kraus: Sequence[np.ndarray], in_dims: SystemDims,
                            out_dims: SystemDims) -> np.ndarray:
    """Choi operator of a CP (not necessarily TP) Kraus set."""
    ks = [as_cmatrix(k) for k in kraus]
    d_out, d_in = ks[0].shape
    c = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in ks:
        w = k.T.reshape(-1)
        c += np.outer(w, w.conj())
    return c


@dataclass(frozen=True)
class MeasurePrepareChannel:
    """Measure with orthogonal projectors, prepare a state per outcome."""

    projectors: tuple[np.ndarray, ...]
    prepared_states: tuple[DensityMatrix, ...]
    tol: float = field(default=1e-10)

    def __post_init__(self) -> None:
        projs = tuple(as_cmatrix(p) for p in self.projectors)
        object.__setattr__(self, "projectors", projs)
        if len(projs) != len(self.prepared_states):
            raise QmatError("one prepared state per projector required")
        d = projs[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for i, p in enumerate(projs):
            for j, q in enumerate(projs):
                expect = p if i == j else np.zeros_like(p)
                if np.max(np.abs(p @ q - expect)) > self.tol:
                    raise QmatError("projectors are not mutually orthogonal idempotents")
            total += p
        if np.max(np.abs(total - identity(d))) > self.tol:
            raise QmatError("projectors do not sum to the identity")
        szs = {s.dim for s in self.prepared_states}
        if len(szs) != 1:
            raise QmatError("prepared states must share one dimension")

    @property
    def d_in(self) -> int:
        return self.projectors[0].shape[0]

    def as_channel(self) -> Channel:
        # C = sum_k Pi_k^T (x) gamma_k for rho -> sum_k Tr[Pi_k rho] gamma_k.
        out = self.prepared_states[0]
        c = sum(kron(p.T, g.mat) for p, g in zip(self.projectors, self.prepared_states))
        return Channel(c, _single("X", self.d_in), out.dims)


# --- channel JSON format ----------------------------------------------------


def channel_to_json(ch: Channel) -> dict:
    obj = matrix_to_json(ch.choi, ch.full_dims)
    obj["in_dims"] = list(ch.in_dims.dims)
    obj["out_dims"] = list(ch.out_dims.dims)
    return obj


def channel_from_json(obj: dict) -> Channel:
    m, dims = matrix_from_json(obj)
    try:
        n_in = len(obj["in_dims"])
        n_out = len(obj["out_dims"])
    except (KeyError, TypeError) as exc:
        raise QmatError(f"malformed channel object: {exc}") from exc
    if n_in + n_out != len(dims):
        raise QmatError("in_dims/out_dims inconsistent with dims")
    in_dims = SystemDims(dims.dims[:n_in], dims.labels[:n_in])
    out_dims = SystemDims(dims.dims[n_in:], dims.labels[n_in:])
    if list(in_dims.dims) != list(obj["in_dims"]) or list(out_dims.dims) != list(obj["out_dims"]):
        raise QmatError("in_dims/out_dims do not match dims")
    return Channel(m, in_dims, out_dims)
