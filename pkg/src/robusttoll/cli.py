"""Command-line driver: ``python -m robusttoll <command> ...``.

Every run prints its fully resolved configuration as one JSON line on
stderr and, with ``--out DIR``, also writes it to ``DIR/config.json`` next to
the result files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .equilibrium import DEFAULT_CAP, EnumerationError, StateSpace, enumerate_nash, poa
from .experiments import (
    DEFAULT_DELTAS,
    DEFAULT_LAMBDAS,
    FIG2_HEADER,
    FIG2_MECHANISMS,
    FIG3_HEADER,
    MC_HEADER,
    ROBUST_HEADER,
    SWEEP_DELTAS,
    PerturbationProtocol,
    run_monte_carlo,
    sweep_lambda,
    sweep_robust_poa,
    write_csv,
)
from .game import BasisSet, GameError
from .io import load_game, save_game
from .lp import SolverError
from .robust import RobustLpError, construct_worst_case_game, solve_robust_poa, verify_worst_case
from .tolls import (
    KINDS,
    CertificationError,
    DesignError,
    TollMechanismSpec,
    build_deployed_tolls,
    certify_epsilon,
    design,
)

NAMED_BASES = {"affine": (0, 1), "quartic": (0, 4)}


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _basis(name: str, n: int) -> BasisSet:
    if name in NAMED_BASES:
        return BasisSet.polynomial(NAMED_BASES[name], n)
    tags = [t.strip() for t in name.split(",")]
    degrees = []
    for t in tags:
        if t == "const":
            degrees.append(0)
        elif t.startswith("poly:") and t[5:].isdigit():
            degrees.append(int(t[5:]))
        else:
            raise ValueError(f"unknown basis {name!r}: use affine, quartic or tags like const,poly:2")
    return BasisSet.polynomial(degrees, n)


def _spec(args) -> TollMechanismSpec:
    lam = args.lam[0] if args.lam else 1.0
    return TollMechanismSpec(args.mechanism, lam=lam, allow_negative=args.allow_negative)


def _emit_config(args, command, extra=None):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["command"] = command
    cfg["version"] = __version__
    cfg.update(extra or {})
    text = json.dumps(cfg, sort_keys=True, default=list)
    print(f"config: {text}", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg, sort_keys=True, indent=2, default=list) + "\n")
    return cfg


def _write_json(args, name, payload):
    if args.out:
        path = Path(args.out) / name
        path.write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (set, frozenset, tuple)):
        return list(v)
    return str(v)


def _num(v):
    return "inf" if np.isinf(v) else f"{v:.10g}"


# --- commands ---------------------------------------------------------------


def cmd_nash(args):
    game = load_game(args.game)
    _emit_config(args, "nash")
    tolls = build_deployed_tolls(game, _spec(args))
    ne = enumerate_nash(game, tolls, mode=args.mode, cap=args.cap)
    print(f"{len(ne)} pure Nash equilibria ({ne.mode} mode)")
    for key, rep in zip(ne.members, ne.representatives):
        print(f"  {list(key)}" + (f"  e.g. allocation {list(rep)}" if ne.mode == "symmetric" else ""))
    _write_json(args, "nash.json", {"mode": ne.mode, "equilibria": ne.members,
                                    "multiplicities": ne.multiplicities})


def cmd_poa(args):
    game = load_game(args.game)
    _emit_config(args, "poa")
    tolls = build_deployed_tolls(game, _spec(args))
    rep = poa(game, tolls, mode=args.mode, cap=args.cap)
    print(f"PoA {_num(rep.poa)}")
    print(f"  worst equilibrium cost {rep.worst_ne_cost:.10g} at {list(rep.worst_ne)}")
    print(f"  optimal cost {rep.opt_cost:.10g} at {list(rep.optimum)}")
    _write_json(args, "poa.json", rep.__dict__)


def cmd_design(args):
    basis = _basis(args.basis, args.n)
    _emit_config(args, "design-tolls")
    d = design(basis, _spec(args))
    print(f"{args.mechanism} tolls, n={args.n}, nominal PoA {_num(d.nominal_poa)}")
    for name, row in zip(basis.names, d.toll_bases):
        print(f"  {name}: " + " ".join(f"{v:.6g}" for v in row[1:]))
    _write_json(args, "tolls.json", {"basis": basis.names, "toll_bases": d.toll_bases,
                                     "nominal_poa": d.nominal_poa})


def cmd_certify(args):
    game = load_game(args.game)
    _emit_config(args, "certify-eps")
    cert = certify_epsilon(game, _spec(args), mode=args.mode, cap=args.cap)
    print(f"epsilon {_num(cert.epsilon)}")
    print(f"delta {_num(cert.delta)} (epsilon / max gamma)")
    print(f"delta_relative {_num(cert.delta_relative)}")
    if cert.witness:
        print(f"witness {cert.witness}")
    _write_json(args, "certificate.json", cert.__dict__)


def cmd_robust(args):
    basis = _basis(args.basis, args.n)
    deltas = args.delta or (0.0,)
    mechs = [args.mechanism] if args.mechanism != "fig2" else list(FIG2_MECHANISMS)
    _emit_config(args, "robust-poa", {"deltas": deltas, "mechanisms": mechs})
    rows = sweep_robust_poa(mechs, args.n, deltas, basis, allow_negative=args.allow_negative)
    for r in rows:
        print(f"{r['mechanism']} n={r['n']} delta={r['delta']:g} p*={r['p_star']:.10g} PoA {_num(r['poa'])}")
    if args.out:
        write_csv(Path(args.out) / "robust_poa.csv", rows, ROBUST_HEADER)
        write_csv(Path(args.out) / "fig2.csv", rows, FIG2_HEADER)


def cmd_worst_case(args):
    basis = _basis(args.basis, args.n)
    delta = args.delta[0] if args.delta else 0.0
    _emit_config(args, "worst-case", {"delta": delta})
    F = design(basis, _spec(args)).toll_bases
    res = solve_robust_poa(basis.values, F, args.n, delta)
    wcg = construct_worst_case_game(res.theta, res.theta_hat, basis, F, args.n, delta=delta)
    report = verify_worst_case(wcg)
    bf = poa(wcg.game, wcg.tolls, cap=args.cap)
    print(f"LP bound 1/p* = {_num(res.poa)}")
    print(f"constructed game: {wcg.game.n_agents} agents, {wcg.game.n_resources} resources, "
          f"{len(wcg.labels)} labels")
    print(f"brute-force PoA {_num(bf.poa)}")
    print("verification " + ("passed" if report.passed else "FAILED: " + "; ".join(report.messages())))
    if args.out:
        save_game(wcg.game, Path(args.out) / "worst_case_game.yaml")
        _write_json(args, "worst_case.json", {
            "p_star": res.p_star, "lp_poa": res.poa, "brute_force_poa": bf.poa,
            "labels": wcg.labels, "gamma_tilde": wcg.tolls.gamma_tilde,
            "toll_bases": wcg.tolls.toll_bases, "verified": report.passed})
    if not report.passed:
        return 1


def cmd_perturb(args):
    game = load_game(args.game)
    deltas = args.delta or DEFAULT_DELTAS
    protocol = PerturbationProtocol(deltas, args.trials, args.seed)
    _emit_config(args, "perturb", {"deltas": protocol.delta_grid})
    summary = run_monte_carlo(game, _spec(args), protocol, mode=args.mode, cap=args.cap,
                              workers=args.workers)
    print(f"noiseless PoA {_num(summary.noiseless_poa)}, {len(summary.noiseless_ne)} equilibria")
    print("delta  max_poa  avg_poa  frac_new_ne")
    for r in summary:
        print(f"{r.delta:<6g} {r.max_poa:<8.4f} {r.avg_poa:<8.4f} {r.frac_new_ne:.3f}")
    if args.out:
        write_csv(Path(args.out) / "mc_summary.csv", summary.rows, MC_HEADER)


def cmd_sweep_lambda(args):
    basis = _basis(args.basis, args.n)
    lambdas = args.lam or DEFAULT_LAMBDAS
    deltas = args.delta or SWEEP_DELTAS
    _emit_config(args, "sweep-lambda", {"lambdas": lambdas, "deltas": deltas})
    rows = sweep_lambda(lambdas, deltas, args.n, basis, allow_negative=args.allow_negative)
    for r in rows:
        print(f"lambda={r['lambda']:g} delta={r['delta']:g} PoA {_num(r['poa'])}")
    if args.out:
        write_csv(Path(args.out) / "fig3.csv", rows, FIG3_HEADER)


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robusttoll", description="Toll robustness tools for atomic congestion games.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_, game=False, basis=False, mech_default="optimal_local", mech_choices=KINDS):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func)
        if game:
            sp.add_argument("--game", required=True, help="game file or bundled name (sioux)")
            sp.add_argument("--mode", default="auto", choices=("auto", "generic", "symmetric"))
        if basis:
            sp.add_argument("--basis", default="affine", help="affine, quartic or tags like const,poly:2")
            sp.add_argument("--n", type=int, default=8, help="number of agents (default 8)")
        sp.add_argument("--mechanism", default=mech_default, choices=mech_choices)
        sp.add_argument("--lambda", dest="lam", type=_floats, default=None,
                        help="toll scaling lambda (comma list for sweep-lambda)")
        sp.add_argument("--allow-negative", action="store_true", help="permit subsidies in toll design")
        sp.add_argument("--delta", type=_floats, default=None, help="delta value or comma list")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--trials", type=int, default=200)
        sp.add_argument("--cap", type=int, default=DEFAULT_CAP, help="enumeration cap")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", default=None, help="directory for result files")
        return sp

    add("nash", cmd_nash, "enumerate pure Nash equilibria under tolls", game=True, mech_default="zero")
    add("poa", cmd_poa, "price of anarchy under tolls", game=True, mech_default="zero")
    add("design-tolls", cmd_design, "design toll bases for a basis set", basis=True)
    add("certify-eps", cmd_certify, "certified perturbation radius", game=True)
    add("robust-poa", cmd_robust, "robust PoA bound from the LP", basis=True,
        mech_choices=KINDS + ("fig2",))
    add("worst-case", cmd_worst_case, "build and verify a game attaining the LP bound", basis=True,
        mech_default="zero")
    add("perturb", cmd_perturb, "Monte-Carlo perturbation study", game=True)
    add("sweep-lambda", cmd_sweep_lambda, "robust PoA across the lambda family", basis=True)
    return p


ERRORS = (GameError, EnumerationError, DesignError, CertificationError, RobustLpError,
          SolverError, OSError, ValueError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.trials < 1:
        parser.error("--trials must be >= 1")
    if hasattr(args, "n") and args.n < 1:
        parser.error("--n must be >= 1")
    try:
        return int(args.func(args) or 0)
    except ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
