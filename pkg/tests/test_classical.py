import numpy as np
import pytest

from supermap_retro.channels import Channel, DensityMatrix, MeasurePrepareChannel
from supermap_retro.classical import (
    ClassicalError,
    ConditionalDistribution,
    Distribution,
    bayes_posterior,
    jeffrey_update,
    s3_classical_update,
    s4_classical_update,
)
from supermap_retro.qmat import SystemDims
from supermap_retro.retrodiction import retro_s3_coherence, retro_s4_measure_prepare
from supermap_retro.supermaps import apply_supermap


def test_bayes_posterior_examples():
    ident = ConditionalDistribution(np.eye(2))
    post = bayes_posterior(ident, Distribution.uniform(2), 1)
    assert np.allclose(post.probs, [0.0, 1.0], atol=1e-12)
    flat = ConditionalDistribution(np.full((3, 2), 1 / 3))
    prior = Distribution([0.7, 0.3])
    post = bayes_posterior(flat, prior, 2)
    assert np.allclose(post.probs, prior.probs, atol=1e-12)
    # hand evaluation: 0.9*0.5 / (0.9*0.5 + 0.2*0.5) = 9/11
    asym = ConditionalDistribution(np.array([[0.9, 0.2], [0.1, 0.8]]))
    post = bayes_posterior(asym, Distribution.uniform(2), 0)
    assert np.allclose(post.probs, [9 / 11, 2 / 11], atol=1e-12)


def test_bayes_posterior_zero_evidence_is_an_error():
    table = ConditionalDistribution(np.array([[1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ClassicalError):
        bayes_posterior(table, Distribution.uniform(2), 1)


def test_jeffrey_reduces_to_bayes_on_point_mass():
    asym = ConditionalDistribution(np.array([[0.9, 0.2], [0.1, 0.8]]))
    prior = Distribution([0.4, 0.6])
    for z in (0, 1):
        soft = Distribution.point_mass(2, z)
        assert np.allclose(jeffrey_update(asym, prior, soft).probs,
                           bayes_posterior(asym, prior, z).probs, atol=1e-12)


def test_jeffrey_no_surprise_no_update():
    asym = ConditionalDistribution(np.array([[0.9, 0.2], [0.1, 0.8]]))
    prior = Distribution([0.4, 0.6])
    propagated = asym.propagate(prior)
    out = jeffrey_update(asym, prior, propagated)
    assert np.allclose(out.probs, prior.probs, atol=1e-12)


def test_jeffrey_is_linear_in_the_evidence():
    asym = ConditionalDistribution(np.array([[0.9, 0.2], [0.1, 0.8]]))
    prior = Distribution([0.4, 0.6])
    p0 = bayes_posterior(asym, prior, 0).probs
    p1 = bayes_posterior(asym, prior, 1).probs
    out = jeffrey_update(asym, prior, Distribution([0.3, 0.7]))
    assert np.allclose(out.probs, 0.3 * p0 + 0.7 * p1, atol=1e-12)


def test_jeffrey_support_violation():
    table = ConditionalDistribution(np.array([[1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ClassicalError):
        jeffrey_update(table, Distribution.uniform(2), Distribution([0.5, 0.5]))


def _rand_cond(rng, n_out, n_in):
    t = rng.random((n_out, n_in)) + 0.1
    return ConditionalDistribution(t / t.sum(axis=0, keepdims=True))


def test_s3_classical_update_slice_semantics():
    rng = np.random.default_rng(81)
    prior = _rand_cond(rng, 2, 4)  # P(y|wa), (w, a) with a fastest
    obs = _rand_cond(rng, 2, 2)    # R(y|w)
    # no-update when the observation equals the prior slice at a0
    for a0 in (0, 1):
        slice_obs = ConditionalDistribution(prior.table[:, a0::2])
        out = s3_classical_update(prior, slice_obs, a0)
        assert np.allclose(out.table, prior.table, atol=1e-12)
    out = s3_classical_update(prior, obs, 0)
    # only the a = 0 slices change
    assert np.allclose(out.table[:, 1::2], prior.table[:, 1::2], atol=1e-12)
    assert np.allclose(out.table[:, 0::2], obs.table, atol=1e-12)
    # normalization oracle
    assert np.allclose(out.table.sum(axis=0), 1.0, atol=1e-12)


def test_s4_classical_update_examples():
    rng = np.random.default_rng(82)
    prior = _rand_cond(rng, 4, 2)  # P(za|x), (z, a) with a fastest
    marg = ConditionalDistribution(np.vstack([prior.table[0:2].sum(axis=0),
                                              prior.table[2:4].sum(axis=0)]))
    out = s4_classical_update(prior, marg)
    assert np.allclose(out.table, prior.table, atol=1e-12)
    obs = _rand_cond(rng, 2, 2)
    out = s4_classical_update(prior, obs)
    # marginal over a equals the observation
    marg_out = np.vstack([out.table[0:2].sum(axis=0), out.table[2:4].sum(axis=0)])
    assert np.allclose(marg_out, obs.table, atol=1e-12)


def test_s4_classical_update_product_prior():
    # a independent of z: Q(za|x) = R(z|x) P(a|x)
    p_z = np.array([[0.7, 0.4], [0.3, 0.6]])
    p_a = np.array([[0.2, 0.5], [0.8, 0.5]])
    prior = ConditionalDistribution(np.einsum("zx,ax->zax", p_z, p_a).reshape(4, 2))
    obs = ConditionalDistribution(np.array([[0.1, 0.9], [0.9, 0.1]]))
    out = s4_classical_update(prior, obs)
    expect = np.einsum("zx,ax->zax", obs.table, p_a).reshape(4, 2)
    assert np.allclose(out.table, expect, atol=1e-12)


def test_s4_classical_update_support_violation():
    prior = ConditionalDistribution(np.array([[0.5, 0.5], [0.5, 0.5], [0.0, 0.0], [0.0, 0.0]]))
    obs = ConditionalDistribution(np.array([[0.5, 0.5], [0.5, 0.5]]))
    with pytest.raises(ClassicalError):
        s4_classical_update(prior, obs)


# --- diagonal quantum embeddings reproduce the classical rules -----------------


def diag_channel(table: np.ndarray, in_dims: SystemDims, out_dims: SystemDims) -> Channel:
    """Embed P(out|in) as a channel with diagonal Choi operator."""
    n_out, n_in = table.shape
    c = np.zeros((n_in * n_out, n_in * n_out), dtype=complex)
    for i in range(n_in):
        for o in range(n_out):
            c[i * n_out + o, i * n_out + o] = table[o, i]
    return Channel(c, in_dims, out_dims)


def choi_diagonal(ch: Channel) -> np.ndarray:
    n_in, n_out = ch.d_in, ch.d_out
    return np.real(np.diag(ch.choi)).reshape(n_in, n_out).T.copy()


def test_quantum_s3_matches_classical_on_diagonal_instances():
    rng = np.random.default_rng(83)
    in_dims = SystemDims((2, 2), ("W", "A"))
    out_dims = SystemDims((2,), ("Y",))
    for a0 in (0, 1):
        phi = np.zeros(2, dtype=complex)
        phi[a0] = 1.0
        for _ in range(3):
            p = _rand_cond(rng, 2, 4)   # P(y|wa)
            r = _rand_cond(rng, 2, 2)   # R(y|w)
            prior_q = diag_channel(p.table, in_dims, out_dims)
            obs_q = diag_channel(r.table, SystemDims((2,), ("W",)), out_dims)
            retro = retro_s3_coherence(prior_q, phi)
            updated = apply_supermap(retro, obs_q)
            got = choi_diagonal(updated)
            expect = s3_classical_update(p, r, a0)
            assert np.max(np.abs(got - expect.table)) <= 1e-10
            # off-diagonals stay absent for classical data
            assert np.max(np.abs(updated.choi - np.diag(np.diag(updated.choi)))) <= 1e-10


def test_quantum_s4_matches_classical_on_diagonal_instances():
    rng = np.random.default_rng(84)
    za_dims = SystemDims((2, 2), ("Z", "A"))
    for _ in range(3):
        p = _rand_cond(rng, 4, 2)   # P(za|x)
        r = _rand_cond(rng, 2, 2)   # R(z|x)
        projs = (np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex))
        states = tuple(
            DensityMatrix(np.diag(p.table[:, x]).astype(complex), za_dims) for x in range(2)
        )
        mp = MeasurePrepareChannel(projs, states)
        retro = retro_s4_measure_prepare(mp)
        obs_q = diag_channel(r.table, SystemDims((2,), ("X",)), SystemDims((2,), ("Z",)))
        updated = apply_supermap(retro, obs_q)
        got = choi_diagonal(updated)
        expect = s4_classical_update(p, r)
        assert np.max(np.abs(got - expect.table)) <= 1e-10


def test_distribution_validation():
    with pytest.raises(ClassicalError):
        Distribution([0.5, 0.6])
    with pytest.raises(ClassicalError):
        ConditionalDistribution(np.array([[0.5, 0.4], [0.4, 0.6]]))
