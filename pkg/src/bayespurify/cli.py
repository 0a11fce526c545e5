"""Command-line front end.

Exit codes: 0 success; 1 solver did not converge or a verification failed;
2 invalid input (game, fixture parameters, profile file); 3 a decomposition is
required but none was supplied.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .dcpi import (DecompositionError, build_dcpi_from_ci, identity_decomposition, load_decomposition,
                   verify_dcpi)
from .equilibrium import (BehavioralProfile, ProfileError, as_behavioral, epsilon_gap,
                          solve_behavioral)
from .fixtures import FixtureError, fixture, fixture_names
from .game import GameError, load_game, validate_game
from .measure import SpaceError
from .purification import (MissingDecomposition, PurificationError, purify, resolve_decomposition,
                           verify_purification)
from .security import payoff_security_probe

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NO_DECOMP = 0, 1, 2, 3


class InputError(Exception):
    pass


def _param_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def fixture_params(args) -> dict:
    """Map the shared grid flags onto each fixture's own keyword names."""
    params = {}
    name = args.fixture
    if args.m is not None:
        params["m"] = args.m
    if args.cells is not None:
        params["cells_per_coarse" if name == "necessity" else "cells"] = args.cells
    if args.actions is not None:
        params["actions"] = args.actions
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--param expects key=value, got {item!r}")
        params[key.replace("-", "_")] = _param_value(value)
    return params


def load_source(args):
    """(game, decomposition or None, fixture or None) from --game / --fixture."""
    if bool(args.game) == bool(args.fixture):
        raise InputError("give exactly one of --game or --fixture")
    fx = None
    if args.fixture:
        fx = fixture(args.fixture, **fixture_params(args))
        game, decomp = fx.game, fx.decomposition
    else:
        game = load_game(args.game)
        decomp = None
        if game.state_dependent:
            game, decomp = build_dcpi_from_ci(game)
    if getattr(args, "identity", False):
        decomp = None
    if getattr(args, "decomp", None):
        decomp = load_decomposition(args.decomp)
    report = validate_game(game)
    if not report.passed:
        raise InputError(f"game failed validation:\n{report}")
    return game, decomp, fx


def out_dir(args) -> Path:
    path = Path(args.out_dir or os.environ.get("BAYESPURIFY_OUT_DIR") or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


def write_strategy_csv(path: Path, probs) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["player", "cell_index", "action_index", "probability"])
        for i, g in enumerate(probs):
            for t in range(g.shape[0]):
                for a in range(g.shape[1]):
                    w.writerow([i, t, a, repr(float(g[t, a]))])


def read_profile(path: str, game) -> BehavioralProfile:
    """Profile from a strategy CSV or a solve report JSON."""
    p = Path(path)
    if not p.exists():
        raise InputError(f"profile file not found: {path}")
    probs = [np.zeros((N, A)) for N, A in zip(game.type_counts, game.action_counts)]
    try:
        if p.suffix == ".json":
            doc = json.loads(p.read_text())
            doc = doc.get("profile", doc)
            probs = [np.asarray(doc[str(i)], dtype=float) for i in range(game.n)]
        else:
            with p.open() as fh:
                for row in csv.DictReader(fh):
                    i, t, a = int(row["player"]), int(row["cell_index"]), int(row["action_index"])
                    probs[i][t, a] = float(row["probability"])
    except (KeyError, ValueError, IndexError, json.JSONDecodeError) as exc:
        raise ProfileError(f"profile file does not match the game: {exc}") from exc
    return as_behavioral(game, BehavioralProfile(tuple(probs)))


def solver_opts(args) -> dict:
    return {"max_iters": args.max_iters, "tol": args.tol if args.tol is not None else 1e-3,
            "damping": args.damping}


def cmd_solve(args) -> int:
    game, decomp, _ = load_source(args)
    rep = solve_behavioral(game, decomp, seed=args.seed, **solver_opts(args))
    out = out_dir(args)
    doc = rep.to_dict()
    doc["game"] = game.name
    write_json(out / "solve_report.json", doc)
    write_strategy_csv(out / "strategy.csv", rep.profile.probs)
    print(f"iterations {rep.iterations}, gaps {[float(g) for g in rep.gaps]}, converged {rep.converged}")
    return EXIT_OK if rep.converged else EXIT_FAIL


def _canonical_profile(fx, game):
    if fx is None or "canonical" not in fx.extras:
        raise InputError("this game ships no canonical profile")
    return as_behavioral(game, fx.extras["canonical"])


def cmd_purify(args) -> int:
    game, decomp, fx = load_source(args)
    decomp = resolve_decomposition(game, decomp)
    solve_doc = None
    if args.profile == "canonical":
        g = _canonical_profile(fx, game)
    elif args.profile:
        g = read_profile(args.profile, game)
    else:
        rep = solve_behavioral(game, decomp, seed=args.seed, **solver_opts(args))
        g, solve_doc = rep.profile, {"iterations": rep.iterations, "converged": rep.converged,
                                     "gaps": [float(x) for x in rep.gaps]}
    f, prep = purify(game, decomp, g, support_eps=args.support_eps, seed=args.seed)
    quant = max(float(sp.max_fine_mass().max()) for sp in game.spaces)
    tol = args.purify_tol if args.purify_tol is not None else quant
    ver = verify_purification(game, decomp, g, f, tol, seed=args.seed, support_eps=args.support_eps)
    doc = prep.to_dict()
    doc.update({"game": game.name, "tol": tol, "quantization_bound": quant, "verification": ver,
                "gaps": {"behavioral": epsilon_gap(game, g).tolist(),
                         "pure": epsilon_gap(game, f).tolist()}})
    if solve_doc is not None:
        doc["solve"] = solve_doc
    out = out_dir(args)
    write_json(out / "purify_report.json", doc)
    write_strategy_csv(out / "pure_strategy.csv", f.behavioral(game.action_counts).probs)
    print(f"max per-cell TV {prep.max_tv:.3g}, verification {'passed' if ver['passed'] else 'FAILED'} "
          f"at tol {tol:.3g}")
    return EXIT_OK if ver["passed"] else EXIT_FAIL


def cmd_verify_dcpi(args) -> int:
    game, decomp, _ = load_source(args)
    if args.identity:
        decomp = identity_decomposition(game)
    if decomp is None:
        raise MissingDecomposition("no decomposition supplied or shipped for this game")
    tol = args.tol if args.tol is not None else 1e-10
    rep = verify_dcpi(game, decomp, tol)
    write_json(out_dir(args) / "dcpi_report.json", rep.to_dict())
    print(f"reconstruction error {rep.max_reconstruction_error:.3g}, measurability spread "
          f"{rep.max_spread:.3g}, {'passed' if rep.passed else 'FAILED'}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_probe_security(args) -> int:
    if args.fixture != "allpay" or args.game:
        raise InputError("probe-security runs on the allpay fixture only")
    _, _, fx = load_source(args)
    rep = payoff_security_probe(fx, args.epsilon, args.samples, args.seed)
    write_json(out_dir(args) / "security_report.json", rep)
    print(f"delta {rep['delta']:.4g}, violations {rep['violations']} of {rep['samples']}")
    return EXIT_OK if rep["passed"] else EXIT_FAIL


def cmd_fixtures(args) -> int:
    for name in fixture_names():
        print(name)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--game", help="game description JSON file")
    p.add_argument("--fixture", help="built-in fixture name")
    p.add_argument("--m", type=int, help="fixture size parameter m (cyclic, necessity)")
    p.add_argument("--cells", type=int, help="fine cells per type dimension")
    p.add_argument("--actions", type=int, help="action grid size")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="extra fixture parameter (value parsed as JSON when possible)")
    p.add_argument("--decomp", help="decomposition JSON file")
    p.add_argument("--identity", action="store_true",
                   help="ignore any shipped decomposition and use the identity one")
    p.add_argument("--tol", type=float, help="solver tolerance (verify-dcpi: reconstruction tolerance)")
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--damping", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="cap on BLAS worker threads")
    p.add_argument("--out-dir", help="report directory (default $BAYESPURIFY_OUT_DIR or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bayespurify",
                                     description="Bayesian game solving and conditional purification")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="behavioral equilibrium by fictitious play")
    _add_common(p)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("purify", help="purify a behavioral profile and verify it")
    _add_common(p)
    p.add_argument("--profile", help="strategy CSV, solve report JSON, or 'canonical'")
    p.add_argument("--purify-tol", type=float, help="verification tolerance (default: quantization bound)")
    p.add_argument("--support-eps", type=float, default=1e-12)
    p.set_defaults(func=cmd_purify)
    p = sub.add_parser("verify-dcpi", help="check a decomposition against the game")
    _add_common(p)
    p.set_defaults(func=cmd_verify_dcpi)
    p = sub.add_parser("probe-security", help="numeric payoff security probe (allpay)")
    _add_common(p)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_probe_security)
    p = sub.add_parser("fixtures", help="fixture registry")
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = getattr(args, "threads", 1)
    try:
        if threads is not None and threads < 1:
            raise InputError("--threads must be positive")
        with threadpool_limits(limits=threads):
            return args.func(args)
    except MissingDecomposition as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_DECOMP
    except (InputError, GameError, FixtureError, SpaceError, ProfileError, DecompositionError,
            PurificationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
