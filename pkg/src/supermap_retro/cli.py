"""Command-line interface.

Subcommands mirror the library surface: channel and supermap validation,
Petz recovery, closed-form retrodiction builds and their verification,
the counterexample demonstration, the numerical V search, and the
fidelity sweep.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .channels import (
    DensityMatrix,
    channel_from_json,
    channel_to_json,
    validate_channel,
)
from .qmat import QmatError, SystemDims, matrix_from_json
from .retrodiction import (
    Family,
    V_COL_BASIS,
    V_ROW_BASIS,
    analytical_v,
    build_from_v,
    family_prior,
    naive_petz_marginal,
    naive_petz_supermap,
    petz,
    recover_prior_residual,
)
from .supermaps import (
    superchannel_from_json,
    superchannel_to_json,
    validate_superchannel,
    s4_constructor,
)
from .vsolver import SolverConfig, solve


def _emit(obj: dict) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _complex_rows(m: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def _v_to_json(v: np.ndarray, r_dim: int) -> dict:
    return {
        "rows": _complex_rows(v),
        "row_dims": [2, 2, v.shape[0] // 4],
        "row_basis": list(V_ROW_BASIS),
        "col_dims": [2, 2, r_dim],
        "col_basis": list(V_COL_BASIS),
    }


def _v_from_json(obj: dict) -> tuple[np.ndarray, int]:
    rows = obj["rows"]
    v = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    return v, int(obj["col_dims"][-1])


def _cmd_validate_channel(args: argparse.Namespace) -> int:
    ch = channel_from_json(_load_json(args.infile))
    report = validate_channel(ch, tol=args.tol)
    _emit(report.as_dict())
    return 0 if report.ok else 1


def _cmd_validate_supermap(args: argparse.Namespace) -> int:
    s = superchannel_from_json(_load_json(args.infile))
    report = validate_superchannel(s, tol=args.tol)
    _emit(report.as_dict())
    return 0 if report.ok else 1


def _cmd_petz(args: argparse.Namespace) -> int:
    e = channel_from_json(_load_json(args.channel))
    mat, dims = matrix_from_json(_load_json(args.prior))
    gamma = DensityMatrix(mat, dims)
    recovery = petz(e, gamma)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(channel_to_json(recovery), fh)
    _emit(validate_channel(recovery).as_dict())
    return 0


def _standard_s4():
    return s4_constructor(SystemDims((2,), ("X",)), SystemDims((2,), ("Z",)),
                          SystemDims((2,), ("A",)))


def _cmd_retro_build(args: argparse.Namespace) -> int:
    family = Family(args.family)
    v, angle = analytical_v(family, args.p)
    prior = family_prior(family, args.p)
    s, build = build_from_v(prior, v, r_dim=2)
    payload = {
        "family": family.value,
        "p": args.p,
        "theta": angle.theta,
        "r_dim": build.r_dim,
        "v": _v_to_json(v, build.r_dim),
        "prior": channel_to_json(prior),
        "supermap": superchannel_to_json(s),
        "report": build.report.as_dict(),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    _emit(build.report.as_dict())
    return 0 if build.report.ok else 1


def _cmd_retro_verify(args: argparse.Namespace) -> int:
    payload = _load_json(args.build)
    prior = channel_from_json(payload["prior"])
    v, r_dim = _v_from_json(payload["v"])
    s, build = build_from_v(prior, v, r_dim=r_dim)
    stored = superchannel_from_json(payload["supermap"])
    rebuild_residual = float(np.max(np.abs(stored.choi - s.choi)))
    prop2 = recover_prior_residual(s, _standard_s4(), prior)
    report = {
        "superchannel": build.report.as_dict(),
        "recover_prior_residual": prop2,
        "rebuild_residual": rebuild_residual,
    }
    _emit(report)
    ok = build.report.ok and prop2 <= 1e-9 and rebuild_residual <= 1e-9
    return 0 if ok else 1


def _cmd_appendix_a(args: argparse.Namespace) -> int:
    s, build = naive_petz_supermap()
    marginal = naive_petz_marginal(s)
    with np.printoptions(precision=6, suppress=True, linewidth=140):
        sys.stdout.write("first-condition marginal over the recovered outputs\n")
        sys.stdout.write("(basis: recovered input, slot input, slot output):\n")
        sys.stdout.write(str(marginal.real) + "\n")
    _emit({
        "verdict": "reject" if not build.report.ok else "accept",
        "report": build.report.as_dict(),
        "recover_prior_residual": recover_prior_residual(s, _standard_s4(), build.prior),
    })
    return 0


def _cmd_solve_v(args: argparse.Namespace) -> int:
    prior = channel_from_json(_load_json(args.prior))
    cfg = SolverConfig(seed=args.seed, tol=args.tol, restarts=args.restarts,
                       max_iters=args.max_iters)
    result = solve(prior, cfg)
    payload = {
        "residual": result.residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "v": _v_to_json(result.v, result.v.shape[0] // (prior.d_in * 2)),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    _emit({"residual": result.residual, "iterations": result.iterations,
           "converged": result.converged})
    return 0 if result.converged else 1


def _cmd_sweep(args: argparse.Namespace) -> int:
    from .experiments import SweepSpec, default_grid, sweep

    grid = default_grid(args.grid)
    spec = SweepSpec(Family(args.prior_family), Family(args.true_family),
                     x_values=grid, y_values=grid)
    result = sweep(spec)
    result.save_csv(args.out)
    _emit({"rows": len(result.rows), "out": args.out})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="supermap-retro",
                                     description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-channel", help="validate a channel Choi file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=_cmd_validate_channel)

    p = sub.add_parser("validate-supermap", help="validate a superchannel Choi file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=_cmd_validate_supermap)

    p = sub.add_parser("petz", help="Petz recovery of a channel w.r.t. a reference state")
    p.add_argument("--channel", required=True)
    p.add_argument("--prior", required=True, help="reference state (matrix JSON)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_petz)

    retro = sub.add_parser("retro", help="closed-form retrodiction builds")
    retro_sub = retro.add_subparsers(dest="retro_command", required=True)
    p = retro_sub.add_parser("build", help="build one analytical family")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_retro_build)
    p = retro_sub.add_parser("verify", help="re-verify a stored build")
    p.add_argument("--build", required=True)
    p.set_defaults(func=_cmd_retro_verify)

    p = sub.add_parser("appendix-a",
                       help="show the recovery map that is not a superchannel")
    p.set_defaults(func=_cmd_appendix_a)

    p = sub.add_parser("solve-v", help="numerical search for a valid unitary V")
    p.add_argument("--prior", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-iters", type=int, default=400)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_solve_v)

    p = sub.add_parser("sweep", help="fidelity comparison over a noise grid")
    p.add_argument("--prior-family", required=True, choices=[f.value for f in Family])
    p.add_argument("--true-family", required=True, choices=[f.value for f in Family])
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (QmatError, FileNotFoundError, KeyError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
