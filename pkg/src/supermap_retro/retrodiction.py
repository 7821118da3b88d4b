"""Belief-update machinery: the Petz recovery channel, retrodiction
supermaps for the four basic supermap shapes, the isometry-based form for
partial-trace supermaps, its three analytical families, and the
zero-noise circuit realizations.

Basis-ordering conventions for the isometry ``V`` (kept on every build):

* rows enumerate the recovered systems ``(X_r, Z_r, A_r)``;
* columns enumerate ``(X, Z, R)`` with the auxiliary ``R`` factor last.

A mismatch silently corrupts results, so both orderings travel with the
value as metadata.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .channels import (
    CNOT,
    SWAP,
    Channel,
    DensityMatrix,
    MeasurePrepareChannel,
    apply_to_matrix,
    choi_of_kraus_unchecked,
    fresh_labels,
    instrument_phi,
    kraus_of_choi,
    prior_gamma,
    trace_out_channel,
)
from .qmat import (
    QmatError,
    SystemDims,
    as_cmatrix,
    basis_vector,
    frobenius,
    herm_sqrt,
    identity,
    kron,
    kron_all,
    min_eigval,
    partial_trace,
    permute_systems,
    pinv_sqrt,
)
from .supermaps import (
    Superchannel,
    SupermapReport,
    TeethRealization,
    apply_raw,
    compose_supermaps,
    identity_supermap,
    s2_constructor,
    superchannel_from_choi_action,
    superchannel_from_kraus_action,
    validate_superchannel,
)

FULL_RANK_TOL = 1e-9
KRAUS_TOL = 1e-9

V_ROW_BASIS = ("X_r", "Z_r", "A_r")
V_COL_BASIS = ("X", "Z", "R")


class Family(str, enum.Enum):
    """The three prior-channel families with known closed-form builds."""

    CNOT = "cnot"
    SWAP = "swap"
    IDENTITY = "identity"

    @property
    def u_gamma(self) -> np.ndarray:
        if self is Family.CNOT:
            return CNOT.copy()
        if self is Family.SWAP:
            return SWAP.copy()
        return identity(4)


def family_prior(family: Family, p: float) -> Channel:
    """The one-qubit-to-two-qubit prior channel of the named family."""
    return prior_gamma(p, Family(family).u_gamma)


# --- Petz recovery -----------------------------------------------------------


def petz(e: Channel, gamma: DensityMatrix, tol: float = FULL_RANK_TOL) -> Channel:
    """Recovery channel of ``e`` relative to the reference state ``gamma``.

    Kraus form: if ``e`` has Kraus operators ``K_k``, the recovery has
    ``L_k = sqrt(gamma) K_k† e(gamma)^{-1/2}``.  Rank-deficient ``gamma`` or
    ``e(gamma)`` fall back to the pseudo-inverse support convention.
    """
    if gamma.dim != e.d_in:
        raise QmatError(f"reference state dim {gamma.dim} does not match channel input {e.d_in}")
    sqrt_g = herm_sqrt(gamma.mat)
    e_g = apply_to_matrix(e, gamma.mat)
    isq_eg = pinv_sqrt(e_g, tol=tol)
    ops = [sqrt_g @ k.conj().T @ isq_eg for k in kraus_of_choi(e, tol=KRAUS_TOL)]
    choi = choi_of_kraus_unchecked(ops, e.out_dims, e.in_dims)
    return Channel(choi, e.out_dims, e.in_dims)


# --- retrodiction of the four basic supermap shapes -------------------------


def retro_s1(prior: Channel, am_dims: SystemDims) -> Superchannel:
    """Undo ``N -> N (x) I``: feed the extra wire the maximally mixed state
    and discard its output."""
    d_a = am_dims.total
    a_in = am_dims.relabeled(fresh_labels(am_dims.labels, prior.in_dims.labels))
    a_out = am_dims.relabeled(
        fresh_labels(am_dims.labels, list(prior.out_dims.labels) + list(a_in.labels))
    )
    slot_in = prior.in_dims.concat(a_in)
    slot_out = prior.out_dims.concat(a_out)
    full = slot_in.concat(slot_out.relabeled(fresh_labels(slot_out.labels, slot_in.labels)))
    traced = [full.labels[len(prior.in_dims)], full.labels[len(slot_in) + len(prior.out_dims)]]

    def act(c: np.ndarray) -> np.ndarray:
        return partial_trace(c, full, traced) / d_a

    return superchannel_from_choi_action(act, slot_in, slot_out, prior.in_dims, prior.out_dims)


def retro_s2(u_left: np.ndarray, u_right: np.ndarray) -> Superchannel:
    """Undo ``N -> U_R ∘ N ∘ U_L``; prior-independent exact inverse."""
    ul, ur = as_cmatrix(u_left), as_cmatrix(u_right)
    return s2_constructor(ul.conj().T, ur.conj().T)


def coherence_condition_residual(prior: Channel, phi: np.ndarray) -> float:
    """Max-entry residual of the prior being blind to coherence across the
    ``phi`` / complement split of its last input factor."""
    inst = instrument_phi(phi)
    d_a = np.asarray(phi).size
    a_label = prior.in_dims.labels[-1]
    if prior.in_dims.dim_of(a_label) != d_a:
        raise QmatError("phi dimension does not match the prior's last input factor")
    d_w = prior.d_in // d_a
    proj = np.outer(np.asarray(phi, dtype=complex), np.asarray(phi, dtype=complex).conj())
    comp = identity(d_a) - proj
    c = np.zeros_like(prior.choi)
    for pi in (proj, comp):
        a_op = kron_all(identity(d_w), pi.T, identity(prior.d_out))
        c += a_op @ prior.choi @ a_op.conj().T
    return float(np.max(np.abs(c - prior.choi)))


def retro_s3_coherence(prior: Channel, phi: np.ndarray,
                       tol: float = FULL_RANK_TOL) -> Superchannel:
    """Retrodiction of ``N -> N ∘ (I (x) P_phi)`` for coherence-blind priors.

    The observed channel is re-used on the ``phi`` branch of the fixed
    input and the prior fills in the orthogonal branch; the arbitrary
    bookkeeping state is fixed to the maximally mixed one.  Priors failing
    the coherence-blindness condition at ``tol`` are rejected.
    """
    v = np.asarray(phi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise QmatError("phi must be normalized")
    residual = coherence_condition_residual(prior, v)
    if residual > tol:
        raise QmatError(
            f"prior is not blind to coherence across the phi split: residual {residual:.3e} > {tol:.1e}"
        )
    d_a = v.size
    a_label = prior.in_dims.labels[-1]
    w_dims = prior.in_dims.drop([a_label])
    d_w, d_y = w_dims.total, prior.d_out
    phibar_op = np.outer(v.conj(), v)
    comp = identity(d_a) - np.outer(v, v.conj())
    block = kron_all(identity(d_w), comp.T, identity(d_y))
    prior_branch = block @ prior.choi @ block.conj().T
    prod_dims = SystemDims((d_w, d_y, d_a), ("w", "y", "a"))

    def act(c: np.ndarray) -> np.ndarray:
        kept = permute_systems(kron(c, phibar_op), prod_dims, ["w", "a", "y"])
        weight = np.trace(c) / d_w
        return kept + weight * prior_branch

    out_out = prior.out_dims.relabeled(
        fresh_labels(prior.out_dims.labels, list(w_dims.labels) + list(prior.in_dims.labels))
    )
    return superchannel_from_choi_action(
        act, w_dims, out_out, prior.in_dims, prior.out_dims
    )


def retro_s4_measure_prepare(prior: MeasurePrepareChannel,
                             tol: float = FULL_RANK_TOL) -> Superchannel:
    """Retrodiction of ``N -> Tr_A ∘ N`` for measure-and-prepare priors.

    Measures the slot input with the prior's projectors and, per outcome,
    recovers the discarded factor with the Petz channel of the partial
    trace relative to that outcome's prepared state.
    """
    gamma0 = prior.prepared_states[0]
    if len(gamma0.dims) < 2:
        raise QmatError("prepared states must expose a discarded tensor factor")
    a_label = gamma0.dims.labels[-1]
    tr_a = trace_out_channel(gamma0.dims, [a_label])
    ops = []
    for proj, gamma in zip(prior.projectors, prior.prepared_states):
        recovery = petz(tr_a, gamma, tol=tol)
        for l_op in kraus_of_choi(recovery, tol=KRAUS_TOL):
            ops.append(kron(proj.T, l_op))
    d_x = prior.d_in
    x_dims = SystemDims((d_x,), ("X",))
    z_dims = gamma0.dims.drop([a_label])
    slot_out = z_dims.relabeled(fresh_labels(z_dims.labels, ["X"]))
    out_in = x_dims.relabeled(fresh_labels(["X"], list(slot_out.labels) + ["X"]))
    out_out = gamma0.dims.relabeled(
        fresh_labels(gamma0.dims.labels, list(slot_out.labels) + list(out_in.labels) + ["X"])
    )
    return superchannel_from_kraus_action(ops, x_dims, slot_out, out_in, out_out)


# --- isometry-based retrodiction of the partial-trace supermap ---------------


@dataclass(frozen=True)
class RetrodictionBuild:
    """A prior, the supermap it retrodicts, and the isometry realizing it."""

    prior: Channel
    target: str
    v: np.ndarray
    r_dim: int
    supermap: Superchannel
    report: SupermapReport
    row_basis: tuple[str, ...] = V_ROW_BASIS
    col_basis: tuple[str, ...] = V_COL_BASIS


@dataclass(frozen=True)
class AngleFamily:
    """Closed-form rotation angle of one analytical family."""

    family: Family
    p: float
    theta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p <= 1.0:
            raise QmatError(f"family parameter must be in (0, 1], got {self.p}")
        s, c = np.sin(self.theta), np.cos(self.theta)
        if abs(s * s + c * c - 1.0) > 1e-12:
            raise QmatError("inconsistent angle")


def _prior_splits(prior: Channel) -> tuple[SystemDims, str, int, int, int]:
    if len(prior.out_dims) < 2:
        raise QmatError("prior must output a composite system with a discarded last factor")
    a_label = prior.out_dims.labels[-1]
    d_a = prior.out_dims.dims[-1]
    d_z = prior.d_out // d_a
    return prior.out_dims, a_label, prior.d_in, d_z, d_a


def build_from_v(prior: Channel, v: np.ndarray, r_dim: int,
                 tol: float = FULL_RANK_TOL) -> tuple[Superchannel, RetrodictionBuild]:
    """Assemble the retrodiction supermap of ``Tr_A`` from a co-isometry.

    The action on the observed channel's Choi operator ``t`` is
    ``C^(1/2) V (D^(-1/2) t D^(-1/2) (x) 1_R) V† C^(1/2)`` with ``C`` the
    prior's Choi operator and ``D`` its marginal after the discard.  The
    recover-the-prior property holds by construction for any ``V`` with
    ``V V† = 1``; superchannel validity is checked and reported, never
    assumed.
    """
    out_dims, a_label, d_x, d_z, d_a = _prior_splits(prior)
    full = prior.full_dims
    c_gamma = prior.choi
    if min_eigval(c_gamma) <= tol:
        raise QmatError("prior must be full-rank; zero-noise priors have circuit realizations instead")
    c_sg = partial_trace(c_gamma, full, [a_label])
    if min_eigval(c_sg) <= tol:
        raise QmatError("discarded-marginal prior is not full-rank")
    v = as_cmatrix(v)
    rows, cols = d_x * d_z * d_a, d_x * d_z * int(r_dim)
    if v.shape != (rows, cols):
        raise QmatError(f"V shape {v.shape}, expected {(rows, cols)} for r_dim={r_dim}")
    if np.max(np.abs(v @ v.conj().T - identity(rows))) > tol:
        raise QmatError("V V† must be the identity on the recovered systems")
    sqrt_cg = herm_sqrt(c_gamma)
    isq_csg = pinv_sqrt(c_sg)
    ops = [
        sqrt_cg @ v @ kron(isq_csg, basis_vector(r_dim, k)[:, None])
        for k in range(r_dim)
    ]
    x_dims = SystemDims((d_x,), ("X",))
    z_dims = out_dims.drop([a_label])
    slot_out = z_dims.relabeled(fresh_labels(z_dims.labels, ["X"]))
    out_in = prior.in_dims.relabeled(
        fresh_labels(prior.in_dims.labels, list(slot_out.labels) + ["X"])
    )
    out_out = out_dims.relabeled(
        fresh_labels(out_dims.labels, list(slot_out.labels) + list(out_in.labels) + ["X"])
    )
    s = superchannel_from_kraus_action(ops, x_dims, slot_out, out_in, out_out)
    report = validate_superchannel(s)
    build = RetrodictionBuild(prior, f"tr[{a_label}]", v, int(r_dim), s, report)
    return s, build


def extract_v(s: Superchannel, prior: Channel, tol: float = KRAUS_TOL) -> np.ndarray:
    """Recover the isometry of a recover-the-prior supermap from its Choi
    operator via Kraus decomposition; columns gain one R index per Kraus
    term."""
    out_dims, a_label, d_x, d_z, d_a = _prior_splits(prior)
    cp_choi = permute_systems(s.choi, s.system_dims, ["X", "Y", "W", "Z"])
    slot = SystemDims((s.d_x * s.d_y,), ("in",))
    out = SystemDims((s.d_w * s.d_z,), ("out",))
    pseudo = Channel(cp_choi, slot, out)
    kraus = kraus_of_choi(pseudo, tol=tol)
    r_dim = len(kraus)
    k_full = np.zeros((s.d_w * s.d_z, s.d_x * s.d_y * r_dim), dtype=complex)
    for k, op in enumerate(kraus):
        k_full[:, k::r_dim] = op
    isq_cg = pinv_sqrt(prior.choi)
    sqrt_csg = herm_sqrt(partial_trace(prior.choi, prior.full_dims, [a_label]))
    return isq_cg @ k_full @ kron(sqrt_csg, identity(r_dim))


# --- analytical families ------------------------------------------------------


def _family_angle(family: Family, p: float) -> float:
    if not 0.0 < p <= 1.0:
        raise QmatError(f"family parameter must be in (0, 1], got {p}")
    base = (sqrt(8.0 - 7.0 * p) - sqrt(p)) / (2.0 * sqrt(2.0 - p))
    if family is Family.CNOT:
        return float(np.arcsin(base))
    if family is Family.SWAP:
        return float(np.arccos(base))
    s2 = (sqrt(p) + sqrt(8.0 - 7.0 * p)) / (2.0 * sqrt(4.0 - 3.0 * p))
    return float(np.arcsin(sqrt(s2)))


def analytical_v(family: Family, p: float) -> tuple[np.ndarray, AngleFamily]:
    """Closed-form 8x8 unitary of the named family at noise ``p``.

    Rows are ordered in the (X_r, Z_r, A_r) product basis and columns in
    (X, Z, R); the rotation angle obeys the family's closed form.
    """
    family = Family(family)
    theta = _family_angle(family, p)
    s, c = np.sin(theta), np.cos(theta)
    v = np.zeros((8, 8), dtype=complex)
    if family is Family.CNOT:
        for r, col in ((0, 0), (1, 1), (3, 3), (4, 4), (6, 6), (7, 7)):
            v[r, col] = 1.0
        v[2, 2], v[2, 5] = c, -s
        v[5, 2], v[5, 5] = s, c
    elif family is Family.SWAP:
        v[0, 4] = -1.0
        for r, col in ((1, 5), (2, 7), (4, 0), (5, 1), (7, 2)):
            v[r, col] = 1.0
        v[3, 3], v[3, 6] = c, -s
        v[6, 3], v[6, 6] = s, c
    else:
        for r, col in ((0, 1), (2, 0), (3, 2), (4, 6), (5, 5), (6, 7)):
            v[r, col] = 1.0
        v[1, 3], v[1, 4] = s, c
        v[7, 3], v[7, 4] = c, -s
    return v, AngleFamily(family, float(p), theta)


def analytical_build(family: Family, p: float) -> tuple[Superchannel, RetrodictionBuild]:
    """Retrodiction supermap of the named family from its closed-form V."""
    v, _ = analytical_v(family, p)
    return build_from_v(family_prior(family, p), v, r_dim=2)


# --- zero-noise circuit realizations -----------------------------------------

_SQ2 = sqrt(2.0)
_CIRCUIT_UL: dict[Family, list[tuple[int, int, float]]] = {
    Family.CNOT: [(0, 0, 1 / _SQ2), (5, 0, 1 / _SQ2), (2, 1, 1 / _SQ2), (4, 1, 1 / _SQ2)],
    Family.SWAP: [(0, 0, 1 / _SQ2), (5, 0, 1 / _SQ2), (2, 1, 1 / _SQ2), (7, 1, 1 / _SQ2)],
}
_CIRCUIT_UR: dict[Family, list[tuple[int, int, float]]] = {
    Family.CNOT: [
        (0, 0, 1.0), (5, 1, 1.0), (6, 2, 1.0), (3, 3, 1.0),
        (7, 4, -1.0), (1, 5, -1.0), (2, 6, 1.0), (4, 7, 1.0),
    ],
    Family.SWAP: [
        (0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0),
        (6, 4, 1.0), (4, 5, 1.0), (7, 6, -1.0), (5, 7, -1.0),
    ],
}


def _identity_circuit() -> tuple[np.ndarray, np.ndarray]:
    a = sqrt(2.0 + _SQ2) / 2.0
    b = sqrt(2.0 - _SQ2) / 2.0
    c = sqrt(2.0 / (2.0 + _SQ2))
    d = sqrt(_SQ2 / (2.0 + _SQ2))
    ul = np.zeros((8, 2), dtype=complex)
    ul[0, 0], ul[5, 0] = a, b
    ul[2, 1], ul[7, 1] = b, a
    ur = np.zeros((8, 8), dtype=complex)
    ur[3, 1] = 1.0
    ur[6, 6] = 1.0
    for r, col in ((5, 0), (0, 5), (1, 7), (4, 2)):
        ur[r, col] = b
    ur[0, 0], ur[5, 5], ur[4, 7], ur[1, 2] = a, -a, a, -a
    ur[2, 3], ur[7, 4] = c, c
    ur[2, 4], ur[7, 3] = d, -d
    return ul, ur


def circuit_realization(family: Family) -> TeethRealization:
    """Teeth (left isometry, right unitary) realizing the zero-noise
    retrodiction supermap of the named family.

    ``u_left`` maps the outer input X_r into (X, M1) with a 4-dimensional
    memory M1; ``u_right`` maps (Z, M1) into (Z_r, A_r, M2) and the
    2-dimensional M2 is discarded.
    """
    family = Family(family)
    if family is Family.IDENTITY:
        ul, ur = _identity_circuit()
    else:
        ul = np.zeros((8, 2), dtype=complex)
        for r, col, val in _CIRCUIT_UL[family]:
            ul[r, col] = val
        ur = np.zeros((8, 8), dtype=complex)
        for r, col, val in _CIRCUIT_UR[family]:
            ur[r, col] = val
    return TeethRealization(
        u_left=ul,
        u_right=ur,
        out_in_dims=SystemDims((2,), ("X_r",)),
        slot_in_dims=SystemDims((2,), ("X",)),
        slot_out_dims=SystemDims((2,), ("Z",)),
        out_out_dims=SystemDims((2, 2), ("Z_r'", "A_r'")),
        am_dim=4,
        ar_dim=2,
    )


# --- axiom verification -------------------------------------------------------


@dataclass(frozen=True)
class PropertyReport:
    """Residuals of the retrodiction axioms for one (R, S, prior) triple."""

    superchannel: SupermapReport
    recover_prior_residual: float
    inverse_residual: float | None = None
    tensor_residual: float | None = None
    composition_residual: float | None = None
    involutive_residual: float | None = None

    def as_dict(self) -> dict:
        out = {"superchannel": self.superchannel.as_dict(),
               "recover_prior_residual": self.recover_prior_residual}
        for key in ("inverse_residual", "tensor_residual",
                    "composition_residual", "involutive_residual"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


def recover_prior_residual(r: Superchannel, s: Superchannel, prior: Channel) -> float:
    """Frobenius distance between the prior and its round trip through
    the supermap and its retrodiction."""
    propagated = apply_raw(s, prior.choi)
    updated = apply_raw(r, propagated)
    return frobenius(updated - prior.choi)


def verify_properties(
    r: Superchannel,
    s: Superchannel,
    prior: Channel,
    check_inverse: bool = False,
    tensor_factors: tuple[tuple[Superchannel, Superchannel], ...] | None = None,
    composition_factors: tuple[Superchannel, ...] | None = None,
    retro_of_r: Superchannel | None = None,
) -> PropertyReport:
    """Check the retrodiction axioms and report residuals.

    Always reports superchannel validity of ``r`` and the
    recover-the-prior residual.  ``check_inverse`` additionally compares
    ``r ∘ s`` against the identity supermap (meaningful when ``s`` is
    invertible).  ``tensor_factors`` is a pair ((r1, s1), (r2, s2)) whose
    tensor products are compared against ``r`` and ``s``.
    ``composition_factors`` is the pair (r_inner, r_outer) whose
    composition is compared against ``r``.  ``retro_of_r``, when supplied,
    is compared against ``s`` as the involution diagnostic; it is reported
    and never asserted.
    """
    report = validate_superchannel(r)
    prop2 = recover_prior_residual(r, s, prior)
    inverse = None
    if check_inverse:
        composed = compose_supermaps(r, s)
        ident = identity_supermap(s.slot_in_dims, s.slot_out_dims)
        inverse = frobenius(composed.choi - ident.choi)
    tensor = None
    if tensor_factors is not None:
        from .supermaps import tensor_supermaps

        (r1, s1), (r2, s2) = tensor_factors
        tensor = max(
            frobenius(tensor_supermaps(r1, r2).choi - r.choi),
            frobenius(tensor_supermaps(s1, s2).choi - s.choi),
        )
    composition = None
    if composition_factors is not None:
        r_inner, r_outer = composition_factors
        composition = frobenius(compose_supermaps(r_inner, r_outer).choi - r.choi)
    involutive = None
    if retro_of_r is not None:
        involutive = frobenius(retro_of_r.choi - s.choi)
    return PropertyReport(report, prop2, inverse, tensor, composition, involutive)


# --- the recovery map that is not a superchannel ------------------------------


def naive_petz_supermap(prior: Channel | None = None) -> tuple[Superchannel, RetrodictionBuild]:
    """The Petz recovery applied directly to Choi operators (V = identity).

    Defaults to the half-depolarized identity-family prior, for which the
    result provably violates the first superchannel trace condition.
    """
    if prior is None:
        prior = family_prior(Family.IDENTITY, 0.5)
    d = prior.d_in * prior.d_out
    _, _, _, _, d_a = _prior_splits(prior)
    return build_from_v(prior, identity(d), r_dim=d_a)


def naive_petz_marginal(s: Superchannel) -> np.ndarray:
    """First-condition marginal ``Tr_out-out[C]`` of a supermap.

    Factor order is (recovered input, slot input, slot output); for a
    qubit-loss recovery that is (W_r, W, Z)."""
    return partial_trace(s.choi, s.system_dims, ["Z"])
