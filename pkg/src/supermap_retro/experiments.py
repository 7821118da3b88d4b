"""Error-correction comparison for remotely accessed computations.

A one-qubit input is sent through an unknown two-qubit-output channel and
one output qubit is lost.  Three recovery strategies are compared by
fidelity to the lossless result, averaged over the six Pauli eigenstates:

1. state-level Petz recovery on the surviving qubit, using the prior
   channel applied to the (known) input as the reference state;
2. ignoring the result and replaying the prior channel from memory;
3. the retrodiction supermap of the loss, built from the prior alone.

Sweeps scan a grid of (prior noise x, true noise y) and emit CSV.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    PAULI_EIGENSTATES,
    Channel,
    DensityMatrix,
    apply,
    fidelity,
    trace_out_channel,
)
from .qmat import QmatError
from .retrodiction import Family, RetrodictionBuild, analytical_build, family_prior, petz
from .supermaps import apply_supermap

CSV_HEADER = "x,y,f_petz,f_prior,f_retro"


class StrategyId(enum.Enum):
    """The three recovery strategies."""

    PETZ_ON_RESULT = "petz_on_result"
    PRIOR_REPLAY = "prior_replay"
    SUPERMAP_RETRO = "supermap_retro"


def _lossy(channel: Channel) -> Channel:
    """The observed channel: the true one with its last output factor lost."""
    a_label = channel.out_dims.labels[-1]
    from .channels import compose_channels

    return compose_channels(trace_out_channel(channel.out_dims, [a_label]), channel)


def run_strategy(
    strategy: StrategyId,
    prior: Channel,
    true_channel: Channel,
    rho: DensityMatrix | None,
    build: RetrodictionBuild | None = None,
) -> DensityMatrix:
    """Recovered two-qubit state for one strategy and one input.

    Only the state-level Petz strategy may read ``rho``'s description (it
    needs the reference state ``prior(rho)``); the supermap strategy needs
    a build; the replay strategy needs neither.
    """
    strategy = StrategyId(strategy)
    if strategy is StrategyId.PRIOR_REPLAY:
        if rho is None:
            raise QmatError("replay strategy still needs the physical input state")
        return apply(prior, rho)
    if rho is None:
        raise QmatError("strategies act on a physical input state")
    if strategy is StrategyId.PETZ_ON_RESULT:
        reference = apply(prior, rho)
        a_label = prior.out_dims.labels[-1]
        loss = trace_out_channel(prior.out_dims, [a_label])
        recovery = petz(loss, reference)
        received = apply(_lossy(true_channel), rho)
        return apply(recovery, received)
    if build is None:
        raise QmatError("the supermap strategy needs a retrodiction build")
    updated = apply_supermap(build.supermap, _lossy(true_channel))
    return apply(updated, rho)


def average_fidelity(
    strategy: StrategyId,
    prior: Channel,
    true_channel: Channel,
    build: RetrodictionBuild | None = None,
) -> float:
    """Mean recovery fidelity over the six Pauli eigenstates."""
    total = 0.0
    for vec in PAULI_EIGENSTATES:
        rho = DensityMatrix.from_vector(vec)
        ideal = apply(true_channel, rho)
        rec = run_strategy(strategy, prior, true_channel, rho, build)
        total += fidelity(rec, ideal)
    return total / len(PAULI_EIGENSTATES)


def default_grid(n: int = 21) -> tuple[float, ...]:
    """Evenly spaced noise values in [0.05, 1.0]; zero noise is excluded
    because the closed-form builds need full-rank priors."""
    return tuple(float(v) for v in np.linspace(0.05, 1.0, n))


@dataclass(frozen=True)
class SweepSpec:
    """Grid specification for one heatmap comparison."""

    prior_family: Family
    true_family: Family
    x_values: tuple[float, ...] = field(default_factory=default_grid)
    y_values: tuple[float, ...] = field(default_factory=default_grid)

    def __post_init__(self) -> None:
        object.__setattr__(self, "prior_family", Family(self.prior_family))
        object.__setattr__(self, "true_family", Family(self.true_family))
        for vals, name in ((self.x_values, "x"), (self.y_values, "y")):
            if not vals or any(not 0.0 < v <= 1.0 for v in vals):
                raise QmatError(f"{name} grid values must lie in (0, 1]")


@dataclass(frozen=True)
class SweepResult:
    """Rows of (x, y, f_petz, f_prior, f_retro), sorted by (x, y)."""

    spec: SweepSpec
    rows: tuple[tuple[float, float, float, float, float], ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for row in self.rows:
            buf.write(",".join(f"{v:.12g}" for v in row) + "\n")
        return buf.getvalue()

    def save_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())


def sweep(spec: SweepSpec) -> SweepResult:
    """Run the full grid; deterministic, rows sorted by (x, y).

    The supermap build depends only on the prior, so it is constructed
    once per column and reused down it.  A failing build aborts with the
    offending grid point.
    """
    rows = []
    for x in sorted(spec.x_values):
        prior = family_prior(spec.prior_family, x)
        try:
            _s, build = analytical_build(spec.prior_family, x)
        except Exception as exc:
            raise QmatError(f"build failed at grid column x={x}: {exc}") from exc
        for y in sorted(spec.y_values):
            try:
                true_channel = family_prior(spec.true_family, y)
                f1 = average_fidelity(StrategyId.PETZ_ON_RESULT, prior, true_channel)
                f2 = average_fidelity(StrategyId.PRIOR_REPLAY, prior, true_channel)
                f3 = average_fidelity(StrategyId.SUPERMAP_RETRO, prior, true_channel, build)
            except Exception as exc:
                raise QmatError(f"sweep failed at grid point ({x}, {y}): {exc}") from exc
            rows.append((float(x), float(y), f1, f2, f3))
    rows.sort(key=lambda r: (r[0], r[1]))
    return SweepResult(spec, tuple(rows))
