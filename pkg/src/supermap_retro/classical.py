"""Classical belief updates: Bayes' rule, Jeffrey's soft-evidence rule, and
the two conditional update rules mirrored by the quantum constructions.

Also serves as the brute-force oracle for diagonal (classical) quantum
instances in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_TOL = 1e-12


class ClassicalError(ValueError):
    """Raised on malformed probability data or zero-probability evidence."""


@dataclass(frozen=True)
class Distribution:
    """Probability vector over a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        if p.size == 0:
            raise ClassicalError("empty distribution")
        if np.any(p < -PROB_TOL):
            raise ClassicalError(f"negative probability {p.min():.3e}")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ClassicalError(f"probabilities sum to {p.sum():.15f}, not 1")
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))

    @property
    def size(self) -> int:
        return self.probs.size

    @classmethod
    def point_mass(cls, size: int, value: int) -> "Distribution":
        p = np.zeros(size)
        p[value] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, size: int) -> "Distribution":
        return cls(np.full(size, 1.0 / size))


@dataclass(frozen=True)
class ConditionalDistribution:
    """Transition table ``table[out, in]``; every column is a distribution."""

    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2 or t.size == 0:
            raise ClassicalError("conditional table must be a non-empty 2-D array")
        if np.any(t < -PROB_TOL):
            raise ClassicalError(f"negative probability {t.min():.3e}")
        sums = t.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > PROB_TOL):
            raise ClassicalError("columns must each sum to 1")
        object.__setattr__(self, "table", np.clip(t, 0.0, None))

    @property
    def n_out(self) -> int:
        return self.table.shape[0]

    @property
    def n_in(self) -> int:
        return self.table.shape[1]

    def propagate(self, prior: Distribution) -> Distribution:
        if prior.size != self.n_in:
            raise ClassicalError("prior alphabet does not match the table input")
        return Distribution(self.table @ prior.probs)


def bayes_posterior(likelihood: ConditionalDistribution, prior: Distribution,
                    z: int) -> Distribution:
    """Posterior over the input given one observed output value."""
    if not 0 <= z < likelihood.n_out:
        raise ClassicalError(f"observed value {z} outside alphabet of size {likelihood.n_out}")
    joint = likelihood.table[z, :] * prior.probs
    norm = joint.sum()
    if norm <= PROB_TOL:
        raise ClassicalError(f"evidence z={z} has zero probability under the prior")
    return Distribution(joint / norm)


def jeffrey_update(likelihood: ConditionalDistribution, prior: Distribution,
                   soft_evidence: Distribution) -> Distribution:
    """Soft-evidence update; reduces to the posterior for point-mass evidence."""
    if soft_evidence.size != likelihood.n_out:
        raise ClassicalError("evidence alphabet does not match the table output")
    propagated = likelihood.propagate(prior)
    out = np.zeros(prior.size)
    for z in range(likelihood.n_out):
        r = soft_evidence.probs[z]
        if r <= 0.0:
            continue
        if propagated.probs[z] <= PROB_TOL:
            raise ClassicalError(f"soft evidence puts weight on impossible outcome z={z}")
        out += r * likelihood.table[z, :] * prior.probs / propagated.probs[z]
    return Distribution(out)


def s3_classical_update(prior: ConditionalDistribution,
                        observation: ConditionalDistribution,
                        a0: int) -> ConditionalDistribution:
    """Replace only the observed slice of a prior ``P(y|wa)``.

    The prior's input alphabet is (w, a) with ``a`` fastest; the updated
    table equals the observation on the ``a = a0`` slice and the prior
    elsewhere.
    """
    n_w = observation.n_in
    if prior.n_in % n_w != 0:
        raise ClassicalError("prior input alphabet is not a multiple of the observation's")
    n_a = prior.n_in // n_w
    if prior.n_out != observation.n_out:
        raise ClassicalError("output alphabets differ")
    if not 0 <= a0 < n_a:
        raise ClassicalError(f"fixed value {a0} outside alphabet of size {n_a}")
    out = prior.table.copy()
    for w in range(n_w):
        out[:, w * n_a + a0] = observation.table[:, w]
    return ConditionalDistribution(out)


def s4_classical_update(prior: ConditionalDistribution,
                        observation: ConditionalDistribution) -> ConditionalDistribution:
    """Conditional Bayes update of a prior ``P(za|x)`` from ``R(z|x)``.

    Output is ``Q(za|x) = R(z|x) P(za|x) / P(z|x)``; its marginal over
    ``a`` equals the observation exactly.
    """
    n_z = observation.n_out
    if prior.n_out % n_z != 0:
        raise ClassicalError("prior output alphabet is not a multiple of the observation's")
    n_a = prior.n_out // n_z
    if prior.n_in != observation.n_in:
        raise ClassicalError("input alphabets differ")
    q = np.zeros_like(prior.table)
    for x in range(prior.n_in):
        for z in range(n_z):
            block = prior.table[z * n_a:(z + 1) * n_a, x]
            p_z = block.sum()
            r_z = observation.table[z, x]
            if r_z <= 0.0:
                continue
            if p_z <= PROB_TOL:
                raise ClassicalError(
                    f"observation puts weight on outcome z={z} impossible under the prior (x={x})"
                )
            q[z * n_a:(z + 1) * n_a, x] = r_z * block / p_z
    return ConditionalDistribution(q)
