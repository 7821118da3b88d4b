"""Superchannels: validation, application, circuit realizations, and the
four basic constructions.

A supermap sending channels ``X -> Y`` to channels ``W -> Z`` is stored as
one Choi operator over the four groups ``(W, X, Y, Z)``:

* read as the Choi operator of the channel ``(W, Y) -> (X, Z)`` obtained by
  cutting the slot open, it is subject to the two trace conditions checked
  by :func:`validate_superchannel`;
* read as the Choi operator of the completely positive map
  ``C_N -> C_{S(N)}`` on channel Choi operators (slot systems first), it is
  the same matrix reordered, which is how :func:`apply_supermap` uses it.

Both readings are cross-checked against each other in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import Channel, fresh_labels
from .qmat import (
    QmatError,
    SystemDims,
    as_cmatrix,
    basis_vector,
    hermitize,
    identity,
    kron,
    kron_all,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    permute_systems,
)

VALIDATION_TOL = 1e-9
RANK_TOL = 1e-9


@dataclass(frozen=True)
class Superchannel:
    """Choi operator over (W, X, Y, Z) plus the factor structure of each group.

    ``out_in`` (W) and ``out_out`` (Z) describe the produced channel,
    ``slot_in`` (X) and ``slot_out`` (Y) the channel placed in the slot.
    """

    choi: np.ndarray
    out_in_dims: SystemDims
    slot_in_dims: SystemDims
    slot_out_dims: SystemDims
    out_out_dims: SystemDims

    def __post_init__(self) -> None:
        c = as_cmatrix(self.choi)
        d = self.d_w * self.d_x * self.d_y * self.d_z
        if c.shape != (d, d):
            raise QmatError(f"supermap Choi shape {c.shape} inconsistent with dims {d}")
        object.__setattr__(self, "choi", c)

    @property
    def d_w(self) -> int:
        return self.out_in_dims.total

    @property
    def d_x(self) -> int:
        return self.slot_in_dims.total

    @property
    def d_y(self) -> int:
        return self.slot_out_dims.total

    @property
    def d_z(self) -> int:
        return self.out_out_dims.total

    @property
    def system_dims(self) -> SystemDims:
        """The four groups collapsed to single factors W, X, Y, Z."""
        return SystemDims((self.d_w, self.d_x, self.d_y, self.d_z), ("W", "X", "Y", "Z"))


@dataclass(frozen=True)
class SupermapReport:
    """Residuals of the superchannel conditions."""

    herm_violation: float
    min_eigval: float
    cond1_residual: float
    cond2_residual: float
    ok: bool

    def as_dict(self) -> dict:
        return {
            "herm_violation": self.herm_violation,
            "min_eigval": self.min_eigval,
            "cond1_residual": self.cond1_residual,
            "cond2_residual": self.cond2_residual,
            "ok": self.ok,
        }


def validate_superchannel_matrix(c: np.ndarray, dims: SystemDims,
                                 tol: float = VALIDATION_TOL) -> SupermapReport:
    """Validate a raw (W, X, Y, Z)-ordered Choi operator.

    Accepts iff the operator is Hermitian PSD, ``Tr_Z[C]`` equals
    ``Tr_YZ[C]/d_Y (x) 1_Y``, and ``Tr_XYZ[C] = d_Y 1_W``, all at ``tol``.
    """
    if len(dims) != 4:
        raise QmatError("superchannel dims must have exactly four factors")
    c = as_cmatrix(c)
    w_lbl, x_lbl, y_lbl, z_lbl = dims.labels
    d_w, _, d_y, _ = dims.dims
    herm = float(np.max(np.abs(c - c.conj().T)))
    eigs = np.linalg.eigvalsh((c + c.conj().T) / 2)
    mineig = float(eigs[0])
    tr_z = partial_trace(c, dims, [z_lbl])
    tr_yz = partial_trace(c, dims, [y_lbl, z_lbl])
    cond1 = float(np.max(np.abs(tr_z - kron(tr_yz / d_y, identity(d_y)))))
    tr_xyz = partial_trace(c, dims, [x_lbl, y_lbl, z_lbl])
    cond2 = float(np.max(np.abs(tr_xyz - d_y * identity(d_w))))
    ok = herm <= tol and mineig >= -tol and cond1 <= tol and cond2 <= tol
    return SupermapReport(herm, mineig, cond1, cond2, ok)


def validate_superchannel(s: Superchannel, tol: float = VALIDATION_TOL) -> SupermapReport:
    return validate_superchannel_matrix(s.choi, s.system_dims, tol=tol)


def apply_raw(s: Superchannel, m: np.ndarray) -> np.ndarray:
    """Linear action on an arbitrary operator over the slot systems.

    Contracts ``Tr_XY[(1_W (x) m^T (x) 1_Z) C]``; no channel validation.
    """
    m = as_cmatrix(m)
    dx, dy = s.d_x, s.d_y
    if m.shape != (dx * dy, dx * dy):
        raise QmatError(f"operator shape {m.shape} does not fit slot ({dx}, {dy})")
    c8 = s.choi.reshape(s.d_w, dx, dy, s.d_z, s.d_w, dx, dy, s.d_z)
    m4 = m.reshape(dx, dy, dx, dy)
    out = np.einsum("abcd,wabzvcdu->wzvu", m4, c8)
    return np.ascontiguousarray(out.reshape(s.d_w * s.d_z, s.d_w * s.d_z))


def apply_supermap(s: Superchannel, n: Channel) -> Channel:
    """Insert a channel into the slot and return the produced channel."""
    if n.d_in != s.d_x or n.d_out != s.d_y:
        raise QmatError(
            f"channel ({n.d_in}->{n.d_out}) does not fit slot ({s.d_x}->{s.d_y})"
        )
    return Channel(apply_raw(s, n.choi), s.out_in_dims, s.out_out_dims)


def _reorder_to_wxyz(choi_slot_first: np.ndarray, slot_in: SystemDims, slot_out: SystemDims,
                     out_in: SystemDims, out_out: SystemDims) -> np.ndarray:
    """Reorder a (slot, out)-ordered Choi operator to (W, X, Y, Z)."""
    groups = [slot_in, slot_out, out_in, out_out]
    prefixes = ["X", "Y", "W", "Z"]
    labels: list[str] = []
    dims: list[int] = []
    for grp, pre in zip(groups, prefixes):
        labels.extend(f"{pre}.{k}" for k in range(len(grp)))
        dims.extend(grp.dims)
    fine = SystemDims(tuple(dims), tuple(labels))
    order = [s for s in labels if s.startswith("W.")]
    order += [s for s in labels if s.startswith("X.")]
    order += [s for s in labels if s.startswith("Y.")]
    order += [s for s in labels if s.startswith("Z.")]
    return permute_systems(choi_slot_first, fine, order)


def superchannel_from_kraus_action(ops: Sequence[np.ndarray], slot_in: SystemDims,
                                   slot_out: SystemDims, out_in: SystemDims,
                                   out_out: SystemDims) -> Superchannel:
    """Build a supermap whose action on channel Choi operators is
    ``C -> sum_k M C M†`` for the given operators ``M``."""
    s_dim = slot_in.total * slot_out.total
    o_dim = out_in.total * out_out.total
    c = np.zeros((s_dim * o_dim, s_dim * o_dim), dtype=complex)
    for m in ops:
        m = as_cmatrix(m)
        if m.shape != (o_dim, s_dim):
            raise QmatError(f"action operator shape {m.shape}, expected {(o_dim, s_dim)}")
        w = m.T.reshape(-1)
        c += np.outer(w, w.conj())
    choi = _reorder_to_wxyz(c, slot_in, slot_out, out_in, out_out)
    return Superchannel(choi, out_in, slot_in, slot_out, out_out)


def superchannel_from_choi_action(f: Callable[[np.ndarray], np.ndarray], slot_in: SystemDims,
                                  slot_out: SystemDims, out_in: SystemDims,
                                  out_out: SystemDims) -> Superchannel:
    """Build a supermap from its linear action on slot Choi operators.

    ``f`` is evaluated on every matrix unit of the slot space.
    """
    s_dim = slot_in.total * slot_out.total
    o_dim = out_in.total * out_out.total
    c4 = np.zeros((s_dim, s_dim, o_dim, o_dim), dtype=complex)
    for m in range(s_dim):
        for n in range(s_dim):
            e = np.zeros((s_dim, s_dim), dtype=complex)
            e[m, n] = 1.0
            out = as_cmatrix(f(e))
            if out.shape != (o_dim, o_dim):
                raise QmatError(f"action returned shape {out.shape}, expected {(o_dim, o_dim)}")
            c4[m, n] = out
    c = np.ascontiguousarray(c4.transpose(0, 2, 1, 3).reshape(s_dim * o_dim, s_dim * o_dim))
    choi = _reorder_to_wxyz(c, slot_in, slot_out, out_in, out_out)
    return Superchannel(choi, out_in, slot_in, slot_out, out_out)


@dataclass(frozen=True)
class TeethRealization:
    """Circuit data realizing a supermap: a state preparation, a left
    isometry (first tooth), and a right isometry (second tooth).

    ``u_left`` maps (W, A_L) to (X, A_M), ``u_right`` maps (Y, A_M) to
    (Z, A_R); A_R is traced out.  ``phi`` is the pure state prepared on
    A_L (omit it for a trivial one-dimensional A_L).
    """

    u_left: np.ndarray
    u_right: np.ndarray
    out_in_dims: SystemDims
    slot_in_dims: SystemDims
    slot_out_dims: SystemDims
    out_out_dims: SystemDims
    am_dim: int
    ar_dim: int
    phi: np.ndarray | None = None
    tol: float = 1e-10

    def __post_init__(self) -> None:
        ul = as_cmatrix(self.u_left)
        ur = as_cmatrix(self.u_right)
        object.__setattr__(self, "u_left", ul)
        object.__setattr__(self, "u_right", ur)
        d_w, d_x = self.out_in_dims.total, self.slot_in_dims.total
        d_y, d_z = self.slot_out_dims.total, self.out_out_dims.total
        if self.phi is None:
            phi = np.ones(1, dtype=complex)
        else:
            phi = np.asarray(self.phi, dtype=complex).reshape(-1)
            if abs(np.linalg.norm(phi) - 1.0) > self.tol:
                raise QmatError("phi must be normalized")
        object.__setattr__(self, "phi", phi)
        if ul.shape != (d_x * self.am_dim, d_w * phi.size):
            raise QmatError(f"u_left shape {ul.shape}, expected {(d_x * self.am_dim, d_w * phi.size)}")
        if ur.shape != (d_z * self.ar_dim, d_y * self.am_dim):
            raise QmatError(f"u_right shape {ur.shape}, expected {(d_z * self.ar_dim, d_y * self.am_dim)}")
        for name, u in (("u_left", ul), ("u_right", ur)):
            if u.shape[0] < u.shape[1]:
                raise QmatError(f"{name} cannot be an isometry: {u.shape}")
            if np.max(np.abs(u.conj().T @ u - identity(u.shape[1]))) > self.tol:
                raise QmatError(f"{name} is not an isometry at {self.tol:.1e}")

    @property
    def al_dim(self) -> int:
        return self.phi.size


def from_teeth(t: TeethRealization, tol: float = VALIDATION_TOL) -> Superchannel:
    """Assemble the supermap Choi operator of a teeth realization.

    The circuit reading is a channel from (W, Y) to (X, Z); its Kraus
    operators are indexed by the traced A_R basis.  The result is validated
    and a violation raises.
    """
    d_w, d_x = t.out_in_dims.total, t.slot_in_dims.total
    d_y, d_z = t.slot_out_dims.total, t.out_out_dims.total
    d_al, d_am, d_ar = t.al_dim, t.am_dim, t.ar_dim
    # (W, Y) -> (W, A_L, Y): append phi then shuffle it between the wires.
    inject = kron(identity(d_w * d_y), t.phi[:, None])
    wyl = SystemDims((d_w, d_y, d_al), ("W", "Y", "L"))
    inject = _basis_permutation(wyl, ["W", "L", "Y"]) @ inject
    # (W, A_L, Y) -> (X, A_M, Y) -> (X, Y, A_M)
    left = kron(t.u_left, identity(d_y))
    xmy = SystemDims((d_x, d_am, d_y), ("X", "M", "Y"))
    left = _basis_permutation(xmy, ["X", "Y", "M"]) @ left
    # (X, Y, A_M) -> (X, Z, A_R)
    right = kron(identity(d_x), t.u_right)
    stack = right @ left @ inject
    kraus = []
    for r in range(d_ar):
        bra = kron(identity(d_x * d_z), basis_vector(d_ar, r).conj()[None, :])
        kraus.append(bra @ stack)
    # Choi of the (W, Y) -> (X, Z) channel, then reorder to (W, X, Y, Z).
    d_in = d_w * d_y
    c = np.zeros((d_in * d_x * d_z, d_in * d_x * d_z), dtype=complex)
    for k in kraus:
        w = k.T.reshape(-1)
        c += np.outer(w, w.conj())
    fine = SystemDims((d_w, d_y, d_x, d_z), ("W", "Y", "X", "Z"))
    choi = permute_systems(c, fine, ["W", "X", "Y", "Z"])
    s = Superchannel(choi, t.out_in_dims, t.slot_in_dims, t.slot_out_dims, t.out_out_dims)
    report = validate_superchannel(s, tol=tol)
    if not report.ok:
        raise QmatError(f"teeth realization failed superchannel validation: {report.as_dict()}")
    return s


def _basis_permutation(dims: SystemDims, new_order: Sequence[str]) -> np.ndarray:
    """Unitary mapping the product basis of ``dims`` to ``new_order``."""
    perm = dims.positions(new_order)
    d = dims.total
    t = identity(d).reshape(dims.dims + (d,))
    t = t.transpose(perm + [len(dims)])
    return np.ascontiguousarray(t.reshape(d, d))


def identity_supermap(slot_in: SystemDims, slot_out: SystemDims) -> Superchannel:
    """The supermap leaving its slot channel unchanged."""
    out_in = slot_in.relabeled(fresh_labels(slot_in.labels, slot_in.labels))
    out_out = slot_out.relabeled(fresh_labels(slot_out.labels, slot_out.labels))
    return superchannel_from_kraus_action(
        [identity(slot_in.total * slot_out.total)], slot_in, slot_out, out_in, out_out
    )


def s1_constructor(slot_in: SystemDims, slot_out: SystemDims, am_dims: SystemDims) -> Superchannel:
    """Tensor an untouched wire onto the slot channel: ``N -> N (x) I``."""
    d_a = am_dims.total
    omega = identity(d_a).reshape(-1)
    omega_op = np.outer(omega, omega.conj())
    d_x, d_y = slot_in.total, slot_out.total
    prod_dims = SystemDims((d_x, d_y, d_a, d_a), ("X", "Y", "Ai", "Ao"))

    def act(e: np.ndarray) -> np.ndarray:
        return permute_systems(kron(e, omega_op), prod_dims, ["X", "Ai", "Y", "Ao"])

    out_in = slot_in.concat(am_dims.relabeled(fresh_labels(am_dims.labels, slot_in.labels)))
    taken = list(slot_out.labels) + list(out_in.labels)
    out_out = slot_out.concat(am_dims.relabeled(fresh_labels(am_dims.labels, taken)))
    return superchannel_from_choi_action(act, slot_in, slot_out, out_in, out_out)


def s2_constructor(u_left: np.ndarray, u_right: np.ndarray, tol: float = 1e-10) -> Superchannel:
    """Sandwich the slot channel between unitaries: ``N -> U_R ∘ N ∘ U_L``."""
    ul, ur = as_cmatrix(u_left), as_cmatrix(u_right)
    for name, u in (("u_left", ul), ("u_right", ur)):
        if u.shape[0] != u.shape[1] or np.max(np.abs(u @ u.conj().T - identity(u.shape[0]))) > tol:
            raise QmatError(f"{name} must be unitary")
    slot_in = SystemDims((ul.shape[0],), ("X",))
    slot_out = SystemDims((ur.shape[1],), ("Y",))
    out_in = SystemDims((ul.shape[1],), ("W",))
    out_out = SystemDims((ur.shape[0],), ("Z",))
    return superchannel_from_kraus_action([kron(ul.T, ur)], slot_in, slot_out, out_in, out_out)


def s3_constructor(phi: np.ndarray, w_dims: SystemDims, y_dims: SystemDims,
                   tol: float = 1e-10) -> Superchannel:
    """Feed a fixed pure state into part of the slot input:
    ``N -> N ∘ (I_W (x) P_phi)``."""
    v = np.asarray(phi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise QmatError("phi must be normalized")
    d_a = v.size
    a_label = fresh_labels(["A"], list(w_dims.labels) + list(y_dims.labels))
    slot_in = w_dims.concat(SystemDims((d_a,), a_label))
    # Contraction of the Choi input factor with phi transposes the amplitudes.
    op = kron_all(identity(w_dims.total), v[None, :], identity(y_dims.total))
    out_in = w_dims.relabeled(fresh_labels(w_dims.labels, slot_in.labels))
    out_out = y_dims.relabeled(fresh_labels(y_dims.labels, list(slot_in.labels) + list(out_in.labels)))
    return superchannel_from_kraus_action([op], slot_in, y_dims, out_in, out_out)


def s4_constructor(x_dims: SystemDims, z_dims: SystemDims, a_dims: SystemDims) -> Superchannel:
    """Discard part of the slot output: ``N -> Tr_A ∘ N``."""
    d_x, d_z, d_a = x_dims.total, z_dims.total, a_dims.total
    a_label = fresh_labels(["A"], list(x_dims.labels) + list(z_dims.labels))
    slot_out = z_dims.concat(SystemDims((d_a,), a_label))
    ops = [kron(identity(d_x * d_z), basis_vector(d_a, a).conj()[None, :]) for a in range(d_a)]
    out_in = x_dims.relabeled(fresh_labels(x_dims.labels, list(x_dims.labels) + list(slot_out.labels)))
    out_out = z_dims.relabeled(fresh_labels(z_dims.labels, list(out_in.labels) + list(slot_out.labels) + list(x_dims.labels)))
    return superchannel_from_kraus_action(ops, x_dims, slot_out, out_in, out_out)


def compose_supermaps(outer: Superchannel, inner: Superchannel) -> Superchannel:
    """The supermap ``N -> outer(inner(N))``."""
    if inner.d_w != outer.d_x or inner.d_z != outer.d_y:
        raise QmatError("supermap composition dimension mismatch")
    return superchannel_from_choi_action(
        lambda e: apply_raw(outer, apply_raw(inner, e)),
        inner.slot_in_dims, inner.slot_out_dims, outer.out_in_dims, outer.out_out_dims,
    )


def tensor_supermaps(a: Superchannel, b: Superchannel) -> Superchannel:
    """The supermap acting as ``a`` and ``b`` on two parallel slots."""
    prod = kron(a.choi, b.choi)
    fine = SystemDims(
        (a.d_w, a.d_x, a.d_y, a.d_z, b.d_w, b.d_x, b.d_y, b.d_z),
        ("aW", "aX", "aY", "aZ", "bW", "bX", "bY", "bZ"),
    )
    choi = permute_systems(prod, fine, ["aW", "bW", "aX", "bX", "aY", "bY", "aZ", "bZ"])

    def join(lhs: SystemDims, rhs: SystemDims) -> SystemDims:
        return lhs.concat(rhs.relabeled(fresh_labels(rhs.labels, lhs.labels)))

    return Superchannel(
        choi,
        join(a.out_in_dims, b.out_in_dims),
        join(a.slot_in_dims, b.slot_in_dims),
        join(a.slot_out_dims, b.slot_out_dims),
        join(a.out_out_dims, b.out_out_dims),
    )


def supermap_rank(s: Superchannel, tol: float = RANK_TOL) -> int:
    """Numerical rank of the Choi operator, relative threshold ``tol``."""
    w = np.linalg.eigvalsh(hermitize(s.choi, tol=1e-8))
    top = float(w[-1]) if w.size else 0.0
    if top <= 0.0:
        return 0
    return int(np.count_nonzero(w > tol * top))


# --- superchannel JSON format ------------------------------------------------


def superchannel_to_json(s: Superchannel) -> dict:
    return matrix_to_json(s.choi, s.system_dims)


def superchannel_from_json(obj: dict) -> Superchannel:
    m, dims = matrix_from_json(obj)
    if len(dims) != 4:
        raise QmatError("superchannel JSON must carry exactly four labels")
    w, x, y, z = (SystemDims((dims.dims[k],), (dims.labels[k],)) for k in range(4))
    return Superchannel(m, w, x, y, z)
