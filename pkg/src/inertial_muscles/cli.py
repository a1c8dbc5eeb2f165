"""Command-line driver: ``inertial-muscles <command> [flags]``.

Every command exits 0 on success and 1 with a one-line diagnostic on stderr
otherwise (2 for usage errors).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import adjoint
from .dynamics import Controls, Options, inverse_dynamics, simulate
from .integrators import canonical
from .io import read_trajectory, write_table, write_trajectory
from .scene import Scene, SceneError, load_scene, resolve_scene_path
from .wrap.continuity import continuity_report
from .wrap.dataset import SamplingRanges, WrapDataset, generate_dataset
from .wrap.mlp import MLPWeights, TrainConfig, mlp_forward, mlp_train

DATA_DIR = Path(__file__).parent / "data"


class CLIError(RuntimeError):
    pass


def _common(p: argparse.ArgumentParser, scene_required: bool = False):
    p.add_argument("--scene", required=scene_required, help="scene YAML file or bundled scene name")
    p.add_argument("--dt", type=float, help="time step in seconds (default: scene value)")
    p.add_argument("--steps", type=int, help="number of steps (default: scene value)")
    p.add_argument("--integrator", choices=("fe", "bdf1", "sdirk2"), help="time integrator")
    p.add_argument("--qvv", choices=("on", "off"), default="on", help="muscle quadratic velocity vector")
    p.add_argument("--muscle-mass-fraction", type=float, default=1.0,
                   help="fraction of muscle mass on the path; the rest is lumped on anchor bodies")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", help="output file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inertial-muscles", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="forward simulation to a trajectory CSV")
    _common(p, scene_required=True)
    p.add_argument("--torque", type=_floats, help="constant joint torques, comma separated")
    p.add_argument("--excitation", type=float, help="constant excitation for muscles with Hill actuators")
    p.add_argument("--no-energy", action="store_true", help="skip energy columns (written as nan)")

    p = sub.add_parser("invdyn", help="inverse dynamics on a trajectory CSV")
    _common(p, scene_required=True)
    p.add_argument("--trajectory", required=True, help="trajectory CSV written by simulate")
    p.add_argument("--fractions", type=_floats,
                   help="muscle mass fractions to evaluate, comma separated (default: --muscle-mass-fraction)")

    p = sub.add_parser("wrap-sample", help="generate a cylinder-wrap training dataset")
    _common(p)
    p.add_argument("--ranges", default="elbow", help="sampling ranges: YAML/JSON file or bundled preset name")
    p.add_argument("--count", type=int, default=20000, help="number of candidate samples")
    p.add_argument("--threshold", type=float, default=0.01, help="discard band upper bound on l/L")

    p = sub.add_parser("wrap-train", help="train the wrap surrogate on a dataset")
    _common(p)
    p.add_argument("--data", required=True, help="dataset CSV from wrap-sample")
    p.add_argument("--hidden", type=_ints, default=(64, 64, 64, 64), help="hidden layer widths")
    p.add_argument("--train-steps", type=int, default=50000, help="Adam steps")
    p.add_argument("--lr", type=float, default=1e-4, help="Adam learning rate")
    p.add_argument("--batch", type=int, default=256, help="minibatch size")
    p.add_argument("--final-lr-fraction", type=float, default=1.0,
                   help="cosine-decay the learning rate to this fraction (1 keeps it constant)")
    p.add_argument("--holdout", type=float, default=0.1, help="hold-out fraction")

    p = sub.add_parser("wrap-eval", help="hold-out error or joint-sweep continuity report")
    _common(p)
    p.add_argument("--weights", required=True, help="weights JSON (path or bundled name)")
    p.add_argument("--data", help="dataset CSV to evaluate")
    p.add_argument("--holdout", type=float, default=0.1, help="evaluate only the hold-out split of --data")
    p.add_argument("--max-rel-rmse", type=float, default=0.01, help="fail if RMSE / mean length exceeds this")
    p.add_argument("--muscle", help="Type III muscle name for a sweep (needs --scene)")
    p.add_argument("--joint", type=int, default=0, help="coordinate index to sweep")
    p.add_argument("--range", dest="sweep_range", type=_floats, default=(-1.0, 1.0), help="sweep bounds")
    p.add_argument("--samples", type=int, default=401, help="sweep resolution")

    p = sub.add_parser("optimize-reach", help="optimize constant joint torques for a reaching task")
    _common(p, scene_required=True)
    p.add_argument("--iters", type=int, default=50, help="maximum iterations")
    p.add_argument("--tol", type=float, default=1e-8, help="gradient-norm tolerance")
    p.add_argument("--theta0", type=_floats, help="initial torques (default zeros)")
    p.add_argument("--method", choices=("bfgs", "coordinate"), default="bfgs")
    return ap


def _floats(s: str):
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _ints(s: str):
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _options(args) -> Options:
    if not 0.0 <= args.muscle_mass_fraction <= 1.0:
        raise CLIError("--muscle-mass-fraction must lie in [0, 1]")
    return Options(qvv=args.qvv == "on", muscle_mass_fraction=args.muscle_mass_fraction)


def _scene(args) -> Scene:
    return load_scene(resolve_scene_path(args.scene))


def _run_params(args, scene: Scene):
    dt = scene.defaults.dt if args.dt is None else args.dt
    steps = scene.defaults.steps if args.steps is None else args.steps
    integ = canonical(args.integrator or scene.defaults.integrator)
    if not dt > 0.0:
        raise CLIError("--dt must be positive")
    if steps < 0:
        raise CLIError("--steps must be non-negative")
    return dt, steps, integ


def _out(args, default: str) -> Path:
    return Path(args.out or default)


# -- commands --------------------------------------------------------------------


def cmd_simulate(args) -> int:
    scene = _scene(args)
    dt, steps, integ = _run_params(args, scene)
    torques = None
    if args.torque is not None:
        if len(args.torque) != scene.dof:
            raise CLIError(f"--torque needs {scene.dof} values, got {len(args.torque)}")
        torques = np.array(args.torque)
    excite = None
    if args.excitation is not None:
        u = np.full(len(scene.model.muscles), args.excitation)
        excite = lambda t, st: u  # noqa: E731
    rec = simulate(scene.model, scene.initial_state, dt, steps, integ, _options(args),
                   Controls(torques=torques), excite, record_energy=not args.no_energy)
    out = _out(args, f"{scene.name}_trajectory.csv")
    write_trajectory(out, rec, scene.coordinate_names())
    print(f"wrote {len(rec)} rows to {out}")
    return 0


def central_accelerations(t, qdot):
    """Central differences of velocity at interior samples: ``(index, acc)``."""
    if len(t) < 3:
        raise CLIError("trajectory needs at least 3 samples for central differences")
    acc = (qdot[2:] - qdot[:-2]) / (t[2:] - t[:-2])[:, None]
    return np.arange(1, len(t) - 1), acc


def cmd_invdyn(args) -> int:
    scene = _scene(args)
    traj = read_trajectory(args.trajectory)
    if traj.q.shape[1] != scene.dof:
        raise CLIError(f"trajectory has {traj.q.shape[1]} coordinates, scene has {scene.dof}")
    names = scene.coordinate_names()
    if traj.coord_names != names:
        raise CLIError(f"trajectory columns {traj.coord_names} do not match scene coordinates {names}")
    idx, acc = central_accelerations(traj.t, traj.qdot)
    fractions = args.fractions or (args.muscle_mass_fraction,)
    series = []
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise CLIError("fractions must lie in [0, 1]")
        opts = Options(qvv=args.qvv == "on", muscle_mass_fraction=f)
        series.append(inverse_dynamics(scene.model, traj.q[idx], traj.qdot[idx], acc, opts))
    header = ["t"] + [f"tau_{c}_f{f:g}" for f in fractions for c in names]
    cols = [traj.t[idx][:, None]] + series
    for f, s in zip(fractions[1:], series[1:]):
        header += [f"dtau_{c}_f{f:g}" for c in names]
        cols.append(s - series[0])
    out = _out(args, f"{scene.name}_torques.csv")
    write_table(out, header, np.hstack(cols).tolist())
    if len(series) > 1:
        for f, s in zip(fractions[1:], series[1:]):
            peak = np.max(np.abs(s - series[0])) / max(np.max(np.abs(series[0])), 1e-300)
            print(f"peak |tau(f={f:g}) - tau(f={fractions[0]:g})| / max|tau(f={fractions[0]:g})| = {peak:.4g}")
    print(f"wrote {len(idx)} rows to {out}")
    return 0


def load_ranges(ref: str) -> SamplingRanges:
    p = Path(ref)
    if not p.is_file():
        p = DATA_DIR / f"{ref}_ranges.yaml"
        if not p.is_file():
            raise CLIError(f"no ranges file or preset named {ref!r}")
    d = yaml.safe_load(p.read_text())
    try:
        return SamplingRanges.from_dict(d)
    except (TypeError, KeyError, ValueError) as exc:
        raise CLIError(f"{p}: invalid sampling ranges: {exc}") from None


def cmd_wrap_sample(args) -> int:
    if args.count <= 0:
        raise CLIError("--count must be positive")
    ds = generate_dataset(load_ranges(args.ranges), args.count, args.threshold, args.seed)
    out = _out(args, "wrap_dataset.csv")
    ds.save(out)
    wrapped = float(np.mean(ds.wrapped_len > 0.0))
    print(f"retained {len(ds)} of {ds.n_candidates} samples ({ds.retained_fraction:.3f}); "
          f"wrapped fraction {wrapped:.3f}; wrote {out}")
    return 0


def _holdout_error(weights, ds: WrapDataset):
    pred = mlp_forward(weights, ds.inputs)
    err = np.linalg.norm(pred - ds.targets, axis=1)
    rmse = float(np.sqrt(np.mean(err**2)))
    return rmse, rmse / float(np.mean(ds.total_len))


def cmd_wrap_train(args) -> int:
    ds = WrapDataset.load(args.data)
    train, test = ds.split(args.holdout, args.seed)
    cfg = TrainConfig(hidden=tuple(args.hidden), learning_rate=args.lr, steps=args.train_steps,
                      batch_size=args.batch, final_lr_fraction=args.final_lr_fraction)
    res = mlp_train(train.inputs, train.targets, cfg, seed=args.seed)
    w = res.weights
    w.meta.update({
        "wrap_side": ds.ranges.wrap_side,
        "radius_range": list(ds.ranges.radius),
        "sampling_ranges": ds.ranges.to_dict(),
        "threshold": ds.threshold,
        "train_steps": args.train_steps,
        "learning_rate": args.lr,
        "final_lr_fraction": args.final_lr_fraction,
        "hidden": list(args.hidden),
        "seed": args.seed,
        "final_loss": res.final_loss,
    })
    if len(test):
        rmse, rel = _holdout_error(w, test)
        w.meta["holdout_rmse"] = rmse
        print(f"hold-out RMSE {rmse:.4g} m ({100 * rel:.3f}% of mean path length)")
    out = _out(args, "wrap_weights.json")
    w.save(out)
    print(f"final training loss {res.final_loss:.4g} after {args.train_steps} steps ({res.seconds:.1f} s); wrote {out}")
    return 0


def _load_weights(ref: str) -> MLPWeights:
    p = Path(ref)
    if not p.is_file():
        p = DATA_DIR / (ref if ref.endswith(".json") else f"{ref}.json")
    if not p.is_file():
        raise CLIError(f"weights file {ref!r} not found")
    return MLPWeights.load(p)


def cmd_wrap_eval(args) -> int:
    weights = _load_weights(args.weights)
    status = 0
    if args.data:
        ds = WrapDataset.load(args.data)
        if 0.0 < args.holdout < 1.0:
            ds = ds.split(args.holdout, args.seed)[1]
        rmse, rel = _holdout_error(weights, ds)
        ok = rel < args.max_rel_rmse
        print(f"RMSE {rmse:.4g} m = {100 * rel:.3f}% of mean path length "
              f"(limit {100 * args.max_rel_rmse:.3g}%): {'PASS' if ok else 'FAIL'}")
        status = 0 if ok else 1
    if args.muscle:
        if not args.scene:
            raise CLIError("a sweep needs --scene")
        scene = _scene(args)
        mus = {m.name: m for m in scene.model.muscles}.get(args.muscle)
        if mus is None or mus.kind != "III":
            raise CLIError(f"scene has no Type III muscle named {args.muscle!r}")
        if not 0 <= args.joint < scene.dof:
            raise CLIError(f"--joint must lie in [0, {scene.dof})")
        if len(args.sweep_range) != 2 or args.samples < 3:
            raise CLIError("--range needs two values and --samples at least 3")
        theta = np.linspace(*args.sweep_range, args.samples)
        qs = np.repeat(scene.initial_state.q[None], args.samples, 0)
        qs[:, args.joint] = theta
        rep = continuity_report(mus.cylinder, weights, mus.origin, mus.insertion,
                                scene.model.skeleton, qs, theta)
        out = _out(args, f"{scene.name}_{args.muscle}_sweep.csv")
        rep.write_csv(out)
        print(f"max derivative jump: oracle {rep.max_jump_oracle:.4g}, network {rep.max_jump_network:.4g}; "
              f"network RMSE outside discard band {100 * rep.relative_rmse():.3f}% of path length; wrote {out}")
    if not args.data and not args.muscle:
        raise CLIError("nothing to evaluate: pass --data and/or --scene with --muscle")
    return status


def cmd_optimize_reach(args) -> int:
    scene = _scene(args)
    if scene.reach is None:
        raise CLIError("scene has no reach section (effector and target)")
    r = scene.reach
    task = adjoint.ReachTask(
        scene.model, r.effector, r.target, r.horizon,
        r.dt if args.dt is None else args.dt,
        args.integrator or r.integrator,
        scene.initial_state.q, scene.initial_state.qdot, _options(args),
    )
    theta0 = np.zeros(scene.dof) if args.theta0 is None else np.array(args.theta0)
    if theta0.shape != (scene.dof,):
        raise CLIError(f"--theta0 needs {scene.dof} values")
    if args.method == "bfgs":
        res = adjoint.optimize_reach(task, theta0, args.iters, args.tol)
    else:
        res = adjoint.coordinate_search(task, theta0, max_rollouts=50 * args.iters)
    out = _out(args, f"{scene.name}_reach_history.csv")
    write_table(out, ["iter", "objective", "grad_norm", "step_length"],
                [[float(v) for v in row] for row in res.history])
    print(json.dumps({"theta": res.theta.tolist(), "objective": res.objective, "status": res.status,
                      "rollouts": res.rollouts, "gradients": res.gradients}))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "invdyn": cmd_invdyn,
    "wrap-sample": cmd_wrap_sample,
    "wrap-train": cmd_wrap_train,
    "wrap-eval": cmd_wrap_eval,
    "optimize-reach": cmd_optimize_reach,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (CLIError, SceneError, ValueError, RuntimeError, OSError, FloatingPointError) as exc:
        print(f"inertial-muscles {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
