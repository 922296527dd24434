"""Batch command-line front-end.

Subcommands: ``validate`` (invariant report for a config), ``decompose``
(spectral splitting of the drift), ``simulate`` (one trajectory), ``reach``
(forward/backward reachable clouds), ``perset`` / ``controlset`` (region
estimates with grid classifications), and ``verify-example`` (re-run a
bundled example against its exact answer).

Exit codes: 0 on success/pass, 1 on a failed check, 2 on a configuration
error.  All artifacts embed the config hash and seed; reruns with the same
config and seed reproduce them byte-for-byte.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import export
from .algebra import check_grading, spectral_decompose
from .config import ConfigBundle, load_config
from .errors import ConfigError
from .presets import EXAMPLE_NAMES, verify_example
from .reach import (PerSetQuery, estimate_control_set, estimate_per_set,
                    make_grid, sample_reachable)


def _add_common(sub, config_required=True, sampling=False):
    if config_required:
        sub.add_argument("--config", required=True, metavar="PATH",
                         help="experiment configuration file")
    sub.add_argument("--seed", type=int, default=0,
                     help="master random seed (default 0)")
    sub.add_argument("--out", metavar="DIR", default="out",
                     help="output directory for artifacts (default ./out)")
    if sampling:
        sub.add_argument("--budget", type=int, default=20000,
                         help="number of sampled trajectories (default 20000)")
        sub.add_argument("--t-max", type=float, default=8.0, dest="t_max",
                         help="time horizon per trajectory (default 8)")
        sub.add_argument("--grid", type=int, default=101,
                         help="grid resolution per free axis (default 101)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nilctrl",
        description="Simulation and reachability toolkit for control "
                    "systems with automorphism drift on nilpotent groups.")
    subs = p.add_subparsers(dest="command", required=True)

    s = subs.add_parser("validate",
                        help="check every structural invariant of a config")
    _add_common(s)
    s.set_defaults(func=cmd_validate)

    s = subs.add_parser("decompose",
                        help="spectral splitting of the drift derivation")
    _add_common(s)
    s.set_defaults(func=cmd_decompose)

    s = subs.add_parser("simulate",
                        help="integrate one trajectory from the identity")
    _add_common(s)
    s.add_argument("--t-max", type=float, default=8.0, dest="t_max",
                   help="integration horizon (default 8)")
    s.set_defaults(func=cmd_simulate)

    s = subs.add_parser("reach",
                        help="forward and backward reachable clouds")
    _add_common(s, sampling=True)
    s.set_defaults(func=cmd_reach)

    s = subs.add_parser("perset",
                        help="estimate the set of central periodic points")
    _add_common(s, sampling=True)
    s.set_defaults(func=cmd_perset)

    s = subs.add_parser("controlset",
                        help="estimate the control set containing the identity")
    _add_common(s, sampling=True)
    s.set_defaults(func=cmd_controlset)

    s = subs.add_parser("verify-example",
                        help="re-run a bundled example against its answer")
    s.add_argument("name", choices=EXAMPLE_NAMES)
    _add_common(s, config_required=False)
    s.set_defaults(func=cmd_verify_example)
    return p


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    bundle = load_config(args.config)
    raw = bundle.raw
    results = []
    state = {}

    def stage(name, fn):
        try:
            results.append((name, True, fn()))
        except ValueError as exc:
            results.append((name, False, str(exc)))

    def need(*keys):
        return all(k in raw for k in keys)

    def check_algebra():
        alg = bundle.build_algebra()
        state["alg"] = alg
        return (f"dim {alg.dim}, antisymmetry residual "
                f"{alg.antisymmetry_residual():.2e}, Jacobi residual "
                f"{alg.jacobi_residual():.2e}")

    stage("algebra-structure", check_algebra)

    if "alg" in state:
        def check_group():
            grp = bundle.build_group()
            state["grp"] = grp
            lat = f", lattice {list(grp.lattice)}" if grp.lattice else ""
            return f"nilpotency class {grp.class_k}{lat}"
        stage("group-nilpotency", check_group)

    if "alg" in state and need("drift"):
        def check_drift():
            D = np.asarray(raw["drift"], float)
            res = state["alg"].derivation_residual(D)
            if res > 1e-9:
                raise ValueError(
                    f"drift is not a derivation: Leibniz residual {res:.3e}")
            return f"Leibniz residual {res:.3e}"
        stage("drift-derivation", check_drift)

    if need("omega"):
        def check_omega():
            om = np.asarray(raw["omega"], float).reshape(-1, 2)
            for r, (lo, hi) in enumerate(om):
                if not lo < 0 < hi:
                    raise ValueError(
                        f"control range {r + 1} is [{lo:g}, {hi:g}]: "
                        f"0 must be interior (lo < 0 < hi)")
            return f"{om.shape[0]} channel(s), 0 interior in each"
        stage("omega-interior", check_omega)

    if "grp" in state and need("drift", "controls", "omega"):
        def check_system():
            system = bundle.build_system()
            state["system"] = system
            return (f"state dim {system.dim}, {system.control_dim} "
                    f"control(s), step {system.step:g}")
        stage("system-build", check_system)

    if need("torus_dim"):
        def check_semidirect():
            sd = bundle.build_semidirect()
            return (f"torus dim {sd.torus_dim} acting on nil dim "
                    f"{sd.nil_group.dim}")
        stage("semidirect-build", check_semidirect)

    lines = [f"validation of {bundle.path} (sha256 {bundle.sha256[:12]}...)"]
    for name, ok, detail in results:
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    text = "\n".join(lines)
    print(text)
    export.write_report(Path(args.out) / f"{bundle.name}_validate.txt",
                        text, bundle.sha256, args.seed)
    return 0 if all(ok for _, ok, _ in results) else 1


def cmd_decompose(args) -> int:
    bundle = load_config(args.config)
    alg = bundle.build_algebra()
    if "drift" not in bundle.raw:
        raise ConfigError(f"{bundle.path}: decompose needs a 'drift' matrix")
    D = np.asarray(bundle.raw["drift"], float)
    res = alg.derivation_residual(D)
    if res > 1e-9:
        print(f"[FAIL] drift-derivation: Leibniz residual {res:.3e}")
        return 1
    dec = spectral_decompose(D)
    grading = check_grading(alg, dec)
    lines = [f"spectral decomposition of the drift ({bundle.name})"]
    for lam, basis in dec.levels:
        lines.append(f"  level {lam:+.6g}: dim {basis.shape[1]}")
    lines.append(f"  unstable dim {dec.positive_basis.shape[1]}, "
                 f"central dim {dec.zero_basis.shape[1]}, "
                 f"stable dim {dec.negative_basis.shape[1]}")
    lines.append(f"  invariance residual {dec.invariance_residual():.2e}, "
                 f"grading residual {grading:.2e}")
    text = "\n".join(lines)
    print(text)

    rows, tags = [], []
    for space, tag in (("positive", 1.0), ("zero", 0.0), ("negative", -1.0)):
        basis = getattr(dec, f"{space}_basis")
        for col in basis.T:
            rows.append(col)
            tags.append(tag)
    rows = np.array(rows) if rows else np.zeros((0, alg.dim))
    out = Path(args.out)
    export.write_cloud_csv(out / f"{bundle.name}_decompose_bases.csv",
                           rows, np.array(tags), bundle.sha256, args.seed,
                           tag_name="space")
    export.write_report(out / f"{bundle.name}_decompose.txt", text,
                        bundle.sha256, args.seed)
    return 0


def cmd_simulate(args) -> int:
    bundle = load_config(args.config)
    system = bundle.build_system()
    law = bundle.build_law(args.t_max, system.control_dim)
    traj = system.simulate(np.zeros(system.dim), law, args.t_max)
    out = Path(args.out)
    csv = export.write_trajectory_csv(
        out / f"{bundle.name}_trajectory.csv", traj, bundle.sha256,
        args.seed)
    svg = export.timeseries_svg(out / f"{bundle.name}_trajectory.svg", traj,
                                title=f"{bundle.name}: trajectory")
    print(f"simulated {args.t_max:g} time units ({len(traj.times)} samples)"
          f"\n  endpoint {np.array2string(traj.endpoint, precision=6)}"
          f"\n  wrote {csv} and {svg}")
    return 0


def cmd_reach(args) -> int:
    bundle = load_config(args.config)
    system = bundle.build_system()
    half = max(1, args.budget // 2)
    fwd = sample_reachable(system, np.zeros(system.dim), args.t_max, half,
                           seed=args.seed, direction="forward")
    bwd = sample_reachable(system, np.zeros(system.dim), args.t_max, half,
                           seed=args.seed, direction="backward")
    points = np.concatenate([fwd.points, bwd.points])
    tags = np.concatenate([np.zeros(fwd.n_points), np.ones(bwd.n_points)])
    out = Path(args.out)
    csv = export.write_cloud_csv(out / f"{bundle.name}_reach_points.csv",
                                 points, tags, bundle.sha256, args.seed,
                                 extra={"t_max": args.t_max,
                                        "budget": 2 * half})
    svg = export.scatter_svg(out / f"{bundle.name}_reach.svg", points, tags,
                             title=f"{bundle.name}: forward/backward clouds")
    print(f"sampled {half} forward + {half} backward trajectories "
          f"({len(points)} points)\n  wrote {csv} and {svg}")
    return 0


def _region_command(args, runner, kind: str) -> int:
    bundle = load_config(args.config)
    system = bundle.build_system()
    n_free = system.dim - len(system.group.lattice)
    grid = make_grid(system, bundle.window(n_free), args.grid)
    est = runner(system, grid)
    out = Path(args.out)
    base = f"{bundle.name}_{kind}"
    export.write_points_csv(out / f"{base}_points.csv", est, bundle.sha256,
                            args.seed)
    export.write_grid_csv(out / f"{base}_grid.csv", grid, bundle.sha256,
                          args.seed)
    export.heatmap_svg(out / f"{base}.svg", grid,
                       title=f"{bundle.name}: {kind}")
    lines = [f"{kind} estimate for {bundle.name}",
             f"  budget {args.budget}, t_max {args.t_max:g}, "
             f"seed {args.seed}",
             f"  marked points: {est.n_points}"]
    for (lo, hi), ax in zip(est.bbox, est.params.get("free_axes", [])):
        lines.append(f"  x{ax + 1} range [{lo:+.4f}, {hi:+.4f}]")
    if est.diagnostic:
        lines.append(f"  diagnostic: {est.diagnostic}")
    text = "\n".join(lines)
    print(text)
    export.write_report(out / f"{base}.txt", text, bundle.sha256, args.seed)
    return 0


def cmd_perset(args) -> int:
    return _region_command(
        args,
        lambda system, grid: estimate_per_set(
            system, PerSetQuery(f_kind="central_subgroup"), grid=grid,
            budget=args.budget, t_max=args.t_max, seed=args.seed),
        "perset")


def cmd_controlset(args) -> int:
    return _region_command(
        args,
        lambda system, grid: estimate_control_set(
            system, budget=args.budget, grid=grid, t_max=args.t_max,
            seed=args.seed),
        "controlset")


def cmd_verify_example(args) -> int:
    outcome = verify_example(args.name, seed=args.seed)
    print(outcome.summary())
    bundle: ConfigBundle = outcome.data["bundle"]
    export.write_report(Path(args.out) / f"{args.name}_verify.txt",
                        outcome.summary(), bundle.sha256, args.seed)
    return 0 if outcome.passed else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
