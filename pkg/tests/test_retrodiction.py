import numpy as np
import pytest

from supermap_retro.channels import (
    Channel,
    DensityMatrix,
    MeasurePrepareChannel,
    apply_to_matrix,
    kraus_of_choi,
    trace_out_channel,
    unitary_channel,
    validate_channel,
)
from supermap_retro.qmat import QmatError, SystemDims, identity, kron, kron_all
from supermap_retro.retrodiction import (
    Family,
    analytical_build,
    analytical_v,
    build_from_v,
    circuit_realization,
    coherence_condition_residual,
    extract_v,
    family_prior,
    naive_petz_marginal,
    naive_petz_supermap,
    petz,
    recover_prior_residual,
    retro_s1,
    retro_s2,
    retro_s3_coherence,
    retro_s4_measure_prepare,
    verify_properties,
)
from supermap_retro.supermaps import (
    apply_supermap,
    from_teeth,
    s1_constructor,
    s2_constructor,
    s3_constructor,
    s4_constructor,
    supermap_rank,
    tensor_supermaps,
    validate_superchannel,
)

from randutil import qubit, rand_channel, rand_state, rand_unitary, two_qubits

S4_QUBITS = s4_constructor(qubit(), qubit("Z"), qubit("A"))


def coherence_blind_prior(rng, phi, d_w=2, d_y=2):
    """Random channel pre-composed with the coherence-destroying map."""
    in_dims = SystemDims((d_w, phi.size), ("W", "A"))
    base = rand_channel(rng, in_dims, SystemDims((d_y,), ("Y",)))
    proj = np.outer(phi, phi.conj())
    comp = identity(phi.size) - proj
    c = np.zeros_like(base.choi)
    for pi in (proj, comp):
        op = kron_all(identity(d_w), pi.T, identity(d_y))
        c += op @ base.choi @ op.conj().T
    return Channel(c, in_dims, base.out_dims)


def random_measure_prepare(rng, n_outcomes=2):
    u = rand_unitary(rng, 2)
    basis = [u[:, [k]] @ u[:, [k]].conj().T for k in range(n_outcomes)]
    states = tuple(rand_state(rng, two_qubits()) for _ in range(n_outcomes))
    return MeasurePrepareChannel(tuple(basis), states)


# --- Petz map ----------------------------------------------------------------


def test_petz_of_identity_is_identity():
    rng = np.random.default_rng(61)
    gamma = rand_state(rng, qubit())
    from supermap_retro.channels import identity_channel

    r = petz(identity_channel(qubit()), gamma)
    assert np.max(np.abs(r.choi - identity_channel(qubit()).choi)) <= 1e-10


def test_petz_of_unitary_is_inverse_conjugation():
    # symbolic evaluation: E†(X) = U† X U collapses the sandwich to U†·U
    rng = np.random.default_rng(62)
    u = rand_unitary(rng, 2)
    gamma = rand_state(rng, qubit())
    r = petz(unitary_channel(u), gamma)
    expect = unitary_channel(u.conj().T)
    assert np.max(np.abs(r.choi - expect.choi)) <= 1e-10


def test_petz_of_partial_trace_with_maximally_mixed_prior():
    # direct evaluation: recovery appends the maximally mixed lost factor
    gamma = DensityMatrix.maximally_mixed(two_qubits())
    e = trace_out_channel(two_qubits(), ["A"])
    r = petz(e, gamma)
    rng = np.random.default_rng(63)
    sigma = rand_state(rng, qubit("Z"))
    out = apply_to_matrix(r, sigma.mat)
    assert np.max(np.abs(out - kron(sigma.mat, identity(2) / 2))) <= 1e-10


def test_petz_recovers_propagated_prior_and_validates():
    rng = np.random.default_rng(64)
    for _ in range(10):
        e = rand_channel(rng, qubit(), two_qubits())
        gamma = rand_state(rng, qubit())
        r = petz(e, gamma)
        assert validate_channel(r).ok
        back = apply_to_matrix(r, apply_to_matrix(e, gamma.mat))
        assert np.max(np.abs(back - gamma.mat)) <= 1e-10


def test_petz_rank_bound():
    rng = np.random.default_rng(65)
    for k in (1, 2, 3):
        e = rand_channel(rng, qubit(), qubit("Y"), kraus_rank=k)
        gamma = rand_state(rng, qubit())
        r = petz(e, gamma)
        assert len(kraus_of_choi(r)) <= len(kraus_of_choi(e))


# --- basic-case retrodictions --------------------------------------------------


def test_retro_s1_undoes_the_added_wire():
    rng = np.random.default_rng(66)
    prior = rand_channel(rng, qubit(), qubit("Y"))
    am = qubit("M")
    r1 = retro_s1(prior, am)
    s1 = s1_constructor(qubit(), qubit("Y"), am)
    assert validate_superchannel(r1).ok
    for _ in range(5):
        n = rand_channel(rng, qubit(), qubit("Y"))
        back = apply_supermap(r1, apply_supermap(s1, n))
        assert np.max(np.abs(back.choi - n.choi)) <= 1e-10
    # recover-the-prior follows from exact inversion
    assert recover_prior_residual(r1, s1, prior) <= 1e-10
    # identity part is rank 1; feeding/discarding the maximally mixed wire
    # contributes a full-rank d_A x d_A block (eigen-count oracle)
    assert supermap_rank(r1) == 4


def test_retro_s2_is_the_exact_inverse():
    rng = np.random.default_rng(67)
    ul, ur = rand_unitary(rng, 2), rand_unitary(rng, 2)
    s2 = s2_constructor(ul, ur)
    r2 = retro_s2(ul, ur)
    from supermap_retro.supermaps import identity_supermap

    x = np.array([[0, 1], [1, 0]], dtype=complex)
    assert np.max(np.abs(retro_s2(identity(2), identity(2)).choi
                         - identity_supermap(qubit(), qubit("Y")).choi)) <= 1e-12
    for _ in range(5):
        n = rand_channel(rng, qubit(), qubit("Y"))
        back = apply_supermap(r2, apply_supermap(s2, n))
        assert np.max(np.abs(back.choi - n.choi)) <= 1e-10
    # with Pauli X teeth the round trip is exact as well
    rx = retro_s2(x, x)
    n = rand_channel(rng, qubit(), qubit("Y"))
    back = apply_supermap(rx, apply_supermap(s2_constructor(x, x), n))
    assert np.max(np.abs(back.choi - n.choi)) <= 1e-10


def test_retro_s3_recovers_admissible_priors():
    rng = np.random.default_rng(68)
    for _ in range(3):
        phi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        phi /= np.linalg.norm(phi)
        prior = coherence_blind_prior(rng, phi)
        assert coherence_condition_residual(prior, phi) <= 1e-9
        r3 = retro_s3_coherence(prior, phi)
        assert validate_superchannel(r3).ok
        s3 = s3_constructor(phi, qubit("W"), qubit("Y"))
        assert recover_prior_residual(r3, s3, prior) <= 1e-9


def test_retro_s3_applied_to_propagated_prior_returns_prior():
    rng = np.random.default_rng(69)
    phi = np.array([1.0, 0.0], dtype=complex)
    prior = coherence_blind_prior(rng, phi)
    s3 = s3_constructor(phi, qubit("W"), qubit("Y"))
    r3 = retro_s3_coherence(prior, phi)
    observed = apply_supermap(s3, prior)
    back = apply_supermap(r3, observed)
    assert np.max(np.abs(back.choi - prior.choi)) <= 1e-10


def test_retro_s3_rejects_coherent_priors():
    phi = np.array([1.0, 0.0], dtype=complex)
    # forwarding the fixed wire itself is maximally coherence sensitive
    bad = trace_out_channel(SystemDims((2, 2), ("W", "A")), ["W"])
    assert coherence_condition_residual(bad, phi) > 1e-3
    with pytest.raises(QmatError, match="coherence"):
        retro_s3_coherence(bad, phi)


def test_retro_s4_measure_prepare_recovers_prior():
    rng = np.random.default_rng(71)
    for _ in range(3):
        mp = random_measure_prepare(rng)
        prior = mp.as_channel()
        r4 = retro_s4_measure_prepare(mp)
        assert validate_superchannel(r4).ok
        assert recover_prior_residual(r4, S4_QUBITS, prior) <= 1e-9


def test_retro_s4_single_projector_is_one_petz_map():
    rng = np.random.default_rng(72)
    gamma = rand_state(rng, two_qubits())
    mp = MeasurePrepareChannel((identity(2),), (gamma,))
    r4 = retro_s4_measure_prepare(mp)
    # one branch: the whole supermap is M -> Petz ∘ M
    single = petz(trace_out_channel(two_qubits(), ["A"]), gamma)
    n = rand_channel(rng, qubit(), qubit("Z"))
    got = apply_supermap(r4, n)
    expect_mat = np.zeros_like(got.choi)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            block = apply_to_matrix(single, apply_to_matrix(n, e))
            expect_mat[i * 4:(i + 1) * 4, j * 4:(j + 1) * 4] = block
    assert np.max(np.abs(got.choi - expect_mat)) <= 1e-9


# --- isometry-form builds ------------------------------------------------------


def test_build_from_v_identity_v_recovers_prior_but_fails_validity():
    s, build = naive_petz_supermap()
    s4 = S4_QUBITS
    assert recover_prior_residual(s, s4, build.prior) <= 1e-10
    assert not build.report.ok
    assert build.report.cond1_residual > 1e-4


def test_naive_petz_marginal_matches_closed_form():
    s, _build = naive_petz_supermap()
    marg = naive_petz_marginal(s)
    u = np.sqrt(5) / 5 + 0.5
    v = -0.5 + np.sqrt(5) / 5
    w = 0.5 - np.sqrt(5) / 5
    expected = np.array([
        [u, 0, 0, 0, 0, 0, u, 0],
        [0, 1, 0, 0, v, 0, 0, u],
        [0, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, w, 0, 0, v, 0],
        [0, v, 0, 0, w, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0],
        [u, 0, 0, v, 0, 0, 1, 0],
        [0, u, 0, 0, 0, 0, 0, u],
    ], dtype=complex)
    assert np.max(np.abs(marg - expected)) <= 1e-10


def test_build_from_v_analytical_families_pass():
    for fam in Family:
        s, build = analytical_build(fam, 0.5)
        assert build.report.ok
        assert recover_prior_residual(s, S4_QUBITS, build.prior) <= 1e-10
        assert supermap_rank(s) == 2


def test_build_from_v_rejects_bad_inputs():
    prior = family_prior(Family.CNOT, 0.5)
    with pytest.raises(QmatError, match="V V†"):
        build_from_v(prior, np.ones((8, 8), dtype=complex), 2)
    with pytest.raises(QmatError, match="full-rank"):
        build_from_v(family_prior(Family.CNOT, 0.0), identity(8), 2)


def test_build_from_v_wide_co_isometry():
    # d_R = 4 > d_A: V = [1 | 0] padded with zero columns is a co-isometry
    prior = family_prior(Family.IDENTITY, 0.5)
    v = np.zeros((8, 16), dtype=complex)
    v[:, :8] = identity(8)
    s, build = build_from_v(prior, v, r_dim=4)
    assert recover_prior_residual(s, S4_QUBITS, prior) <= 1e-10


def test_extract_v_round_trip_on_closed_forms():
    for fam in Family:
        for p in (0.2, 0.7):
            s, build = analytical_build(fam, p)
            v = extract_v(s, build.prior)
            assert np.max(np.abs(v @ v.conj().T - identity(8))) <= 1e-9
            # rank-2 build: V is square and unitary
            assert v.shape == (8, 8)
            assert np.max(np.abs(v.conj().T @ v - identity(8))) <= 1e-9
            # reassembled build reproduces the supermap
            s2, _ = build_from_v(build.prior, v, r_dim=2)
            assert np.max(np.abs(s2.choi - s.choi)) <= 1e-8


# --- analytical families --------------------------------------------------------


def test_analytical_v_angles_and_limits():
    v, ang = analytical_v(Family.CNOT, 1.0)
    assert abs(np.sin(ang.theta)) <= 1e-12  # (sqrt(1)-1)/2 = 0
    # the rotation block closes to cos = 1: the skeleton is the identity
    assert np.max(np.abs(v - identity(8))) <= 1e-12
    # p -> 0: the rotation closes
    _, ang0 = analytical_v(Family.CNOT, 1e-12)
    assert np.sin(ang0.theta) >= 1.0 - 1e-5
    v_id, ang_id = analytical_v(Family.IDENTITY, 1.0)
    s, c = np.sin(ang_id.theta), np.cos(ang_id.theta)
    assert abs(s - 1.0) <= 1e-12 and abs(c) <= 1e-12
    assert abs(s * s + c * c - 1.0) <= 1e-12


def test_analytical_v_is_unitary_everywhere():
    for fam in Family:
        for p in np.arange(0.05, 1.0001, 0.05):
            v, ang = analytical_v(fam, float(p))
            assert np.max(np.abs(v @ v.conj().T - identity(8))) <= 1e-12
            assert abs(np.sin(ang.theta) ** 2 + np.cos(ang.theta) ** 2 - 1.0) <= 1e-12


def test_analytical_v_rejects_bad_p():
    with pytest.raises(QmatError):
        analytical_v(Family.CNOT, 0.0)
    with pytest.raises(QmatError):
        analytical_v(Family.SWAP, 1.2)


# --- circuit realizations -------------------------------------------------------


def test_circuit_realization_cnot_left_tooth_matches_formula():
    t = circuit_realization(Family.CNOT)
    expect = np.zeros((8, 2), dtype=complex)
    expect[0, 0] = expect[5, 0] = 1 / np.sqrt(2)   # (|00> + |11>)/sqrt2 <0|
    expect[2, 1] = expect[4, 1] = 1 / np.sqrt(2)   # (|02> + |10>)/sqrt2 <1|
    assert np.max(np.abs(t.u_left - expect)) <= 1e-12


def test_circuit_realizations_validate_and_recover_zero_noise_priors():
    for fam in Family:
        t = circuit_realization(fam)
        r = from_teeth(t)
        rep = validate_superchannel(r)
        assert rep.ok and max(rep.cond1_residual, rep.cond2_residual) <= 1e-9
        prior = family_prior(fam, 0.0)
        assert recover_prior_residual(r, S4_QUBITS, prior) <= 1e-9


# --- axiom verification ---------------------------------------------------------


def test_verify_properties_for_exact_inverse():
    rng = np.random.default_rng(73)
    ul, ur = rand_unitary(rng, 2), rand_unitary(rng, 2)
    s2 = s2_constructor(ul, ur)
    r2 = retro_s2(ul, ur)
    prior = rand_channel(rng, qubit(), qubit("Y"))
    rep = verify_properties(r2, s2, prior, check_inverse=True)
    assert rep.superchannel.ok
    assert rep.recover_prior_residual <= 1e-9
    assert rep.inverse_residual <= 1e-9


def test_verify_properties_for_analytical_build():
    s, build = analytical_build(Family.CNOT, 0.5)
    rep = verify_properties(s, S4_QUBITS, build.prior)
    assert rep.superchannel.ok and rep.recover_prior_residual <= 1e-9


def test_verify_properties_tensorial():
    rng = np.random.default_rng(74)
    u = [rand_unitary(rng, 2) for _ in range(4)]
    s_a, s_b = s2_constructor(u[0], u[1]), s2_constructor(u[2], u[3])
    r_a, r_b = retro_s2(u[0], u[1]), retro_s2(u[2], u[3])
    s_prod = tensor_supermaps(s_a, s_b)
    r_prod = tensor_supermaps(r_a, r_b)
    prior = rand_channel(rng, two_qubits("Xa", "Xb"), two_qubits("Ya", "Yb"))
    rep = verify_properties(r_prod, s_prod, prior,
                            tensor_factors=((r_a, s_a), (r_b, s_b)))
    assert rep.tensor_residual <= 1e-10
    assert rep.recover_prior_residual <= 1e-9


def test_verify_properties_compositional():
    rng = np.random.default_rng(75)
    u = [rand_unitary(rng, 2) for _ in range(4)]
    s_first = s2_constructor(u[0], u[1])
    s_second = s2_constructor(u[2], u[3])
    from supermap_retro.supermaps import compose_supermaps

    s_total = compose_supermaps(s_second, s_first)
    r_first, r_second = retro_s2(u[0], u[1]), retro_s2(u[2], u[3])
    r_total = compose_supermaps(r_first, r_second)
    prior = rand_channel(rng, qubit(), qubit("Y"))
    rep = verify_properties(r_total, s_total, prior,
                            composition_factors=(r_first, r_second),
                            check_inverse=True)
    assert rep.composition_residual <= 1e-10
    assert rep.inverse_residual <= 1e-9


def test_involutive_diagnostic_for_invertible_case():
    rng = np.random.default_rng(76)
    ul, ur = rand_unitary(rng, 2), rand_unitary(rng, 2)
    s2 = s2_constructor(ul, ur)
    r2 = retro_s2(ul, ur)
    retro_of_r = retro_s2(ul.conj().T, ur.conj().T)
    prior = rand_channel(rng, qubit(), qubit("Y"))
    rep = verify_properties(r2, s2, prior, retro_of_r=retro_of_r)
    assert rep.involutive_residual <= 1e-10
