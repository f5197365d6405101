"""Command-line entry point.

Subcommands: state, qfi, cfi, lossmap, adapt, oracle.  Every command
writes its primary output file plus a .manifest.json sidecar; the report
commands (cfi, lossmap, adapt) also render a PNG figure next to the data
unless --no-figure is given.  Outputs are deterministic given the flags
and seed.

Exit codes: 0 success, 2 validation error, 3 unsupported branch,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adaptive import (
    AdaptiveConfig,
    Objective,
    RNG_ALGORITHM,
    default_prior,
    run_ensemble,
)
from .errors import (
    DegenerateEvidenceError,
    NumericalError,
    UnsupportedBranchError,
    ValidationError,
)
from .fock import BeamSplitterDirection, PhaseEncoding, beam_splitter_50_50
from .loss import LossChannel, apply_loss
from .manifest import RunManifest, format_float, write_csv
from .measurement import MeasurementKind, MeasurementModel, cfi_at
from .metrology import qfi_mixed, qfi_pure
from .oracle import ReducedProblem, brute_force_full, brute_force_reduced
from .probes import (
    ProbeSpec,
    classify_regime,
    closed_form_qfi,
    noon_state,
    optimal_state,
)

EXIT_VALIDATION = 2
EXIT_UNSUPPORTED = 3
EXIT_NUMERICAL = 4


def _out_dir() -> Path:
    return Path(os.environ.get("FOCKPHASE_OUTDIR", "."))


def _resolve_out(arg: str | None, default_name: str) -> Path:
    if arg is None:
        path = _out_dir() / default_name
    else:
        path = Path(arg)
        if not path.is_absolute() and path.parent == Path("."):
            path = _out_dir() / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _spec_from(args) -> ProbeSpec:
    return ProbeSpec(
        N=args.N,
        nbar=args.nbar,
        encoding=PhaseEncoding(args.encoding),
        theta1=getattr(args, "theta1", 0.0),
        theta2=getattr(args, "theta2", 0.0),
        theta3=getattr(args, "theta3", 0.0),
        theta=getattr(args, "theta", 0.0),
    )


def _channel_from(args) -> LossChannel | None:
    t1 = getattr(args, "T1", None)
    t2 = getattr(args, "T2", None)
    if t1 is None and t2 is None:
        return None
    return LossChannel(T1=1.0 if t1 is None else t1, T2=1.0 if t2 is None else t2)


def _add_spec_flags(p, thetas: bool = True):
    p.add_argument("--N", type=int, required=True, help="per-mode Fock cutoff")
    p.add_argument("--nbar", type=float, required=True, help="mean photon number")
    p.add_argument(
        "--encoding", choices=["linear", "nonlinear"], required=True,
        help="phase-shift generator",
    )
    if thetas:
        p.add_argument("--theta1", type=float, default=0.0)
        p.add_argument("--theta2", type=float, default=0.0)
        p.add_argument("--theta3", type=float, default=0.0)
        p.add_argument("--theta", type=float, default=0.0)


def _add_channel_flags(p):
    p.add_argument("--T1", type=float, default=None, help="mode-a transmission")
    p.add_argument("--T2", type=float, default=None, help="mode-b transmission")


def cmd_state(args) -> int:
    spec = _spec_from(args)
    state = optimal_state(spec)
    out = _resolve_out(args.out, "state.json")
    out.write_text(state.to_json() + "\n")
    written = [str(out)]
    if args.mzi:
        rotated = beam_splitter_50_50(state, BeamSplitterDirection.INVERSE)
        mzi_path = out.with_name(out.stem + "_mzi" + out.suffix)
        mzi_path.write_text(rotated.to_json() + "\n")
        written.append(str(mzi_path))
    RunManifest.create("state", _args_dict(args)).write(out)
    print("\n".join(written))
    return 0


def cmd_qfi(args) -> int:
    spec = _spec_from(args)
    channel = _channel_from(args)
    state = optimal_state(spec)
    result = {
        "N": spec.N,
        "nbar": spec.nbar,
        "encoding": spec.encoding.value,
        "regime": classify_regime(spec).branch.value,
        "closed_form_qfi": closed_form_qfi(spec),
        "qfi_pure": qfi_pure(state, spec.encoding),
    }
    if channel is not None:
        result["T1"], result["T2"] = channel.T1, channel.T2
        result["qfi_lossy"] = qfi_mixed(apply_loss(state, channel), spec.encoding)
    out = _resolve_out(args.out, "qfi.json")
    out.write_text(json.dumps(result, indent=1, sort_keys=True) + "\n")
    RunManifest.create("qfi", _args_dict(args)).write(out)
    print(str(out))
    return 0


def cmd_cfi(args) -> int:
    spec = _spec_from(args)
    channel = _channel_from(args)
    model = MeasurementModel(
        kind=MeasurementKind(args.kind), spec=spec, channel=channel
    )
    if channel is None:
        qfi_value = closed_form_qfi(spec)
    else:
        qfi_value = qfi_mixed(apply_loss(optimal_state(spec), channel), spec.encoding)
    period = model.period
    lo = args.phi_min if args.phi_min is not None else 0.0
    hi = args.phi_max if args.phi_max is not None else lo + period
    phi = np.linspace(lo, hi, args.points)
    values = [cfi_at(model, p, args.phi_u) for p in phi]
    out = _resolve_out(args.out, "cfi.csv")
    write_csv(out, ["phi", "cfi", "qfi"], [(p, v, qfi_value) for p, v in zip(phi, values)])
    RunManifest.create("cfi", _args_dict(args)).write(out)
    if not args.no_figure:
        from .report import render_cfi_figure

        title = f"{args.kind}, {spec.encoding.value}, N={spec.N}, nbar={spec.nbar:g}"
        render_cfi_figure(out, phi, values, [qfi_value] * len(phi), title)
    print(str(out))
    return 0


def _lossmap_grid(args, spec):
    grid = np.linspace(0.0, 1.0, args.grid)
    state = optimal_state(spec)
    n_noon = int(round(spec.nbar))
    if abs(spec.nbar - n_noon) > 1e-9:
        raise ValidationError("lossmap comparison needs an integer nbar for the NOON baseline")
    noon = noon_state(n_noon, cutoff=max(n_noon, 1))
    f_noon_lossless = qfi_pure(noon, spec.encoding)
    rows = []
    region_grid = np.empty((args.grid, args.grid), dtype=object)
    ratio_grid = np.zeros((args.grid, args.grid))
    for a, t1 in enumerate(grid):
        for b, t2 in enumerate(grid):
            ch = LossChannel(t1, t2)
            f_opt = qfi_mixed(apply_loss(state, ch), spec.encoding)
            f_noon = qfi_mixed(apply_loss(noon, ch), spec.encoding)
            if f_opt > f_noon_lossless:
                region = "opt_beats_lossless_noon"
            elif f_opt > f_noon:
                region = "opt_beats_lossy_noon"
            else:
                region = "noon_wins"
            rows.append((t1, t2, f_opt, f_noon, f_noon_lossless, region))
            region_grid[a, b] = region
            ratio_grid[a, b] = f_opt / f_noon if f_noon > 0 else np.inf
    return grid, rows, region_grid, ratio_grid


def _robustness_rows(args):
    thresholds = [float(t) for t in args.thresholds.split(",")]
    nbars = (
        [float(x) for x in args.nbar_grid.split(",")]
        if args.nbar_grid
        else [0.5 * k for k in range(1, 4 * args.N)]
    )
    grid = np.linspace(0.0, 1.0, args.grid)
    rows = []
    encoding = PhaseEncoding(args.encoding)
    for nbar in nbars:
        spec = ProbeSpec(N=args.N, nbar=nbar, encoding=encoding)
        state = optimal_state(spec)
        f_ideal = closed_form_qfi(spec)
        ratios = np.empty((grid.size, grid.size))
        for a, t1 in enumerate(grid):
            for b, t2 in enumerate(grid):
                ch = LossChannel(t1, t2)
                ratios[a, b] = qfi_mixed(apply_loss(state, ch), spec.encoding) / f_ideal
        for thr in thresholds:
            rows.append((nbar, thr, float(np.mean(ratios > thr))))
    return thresholds, rows


def cmd_lossmap(args) -> int:
    if args.robustness:
        thresholds, rows = _robustness_rows(args)
        out = _resolve_out(args.out, "robustness.csv")
        write_csv(out, ["nbar", "threshold", "proportion"], rows)
        RunManifest.create("lossmap", _args_dict(args)).write(out)
        if not args.no_figure:
            from .report import render_robustness_figure

            render_robustness_figure(
                out, rows, thresholds, f"N={args.N}, {args.encoding}"
            )
        print(str(out))
        return 0
    spec = _spec_from(args)
    grid, rows, region_grid, ratio_grid = _lossmap_grid(args, spec)
    out = _resolve_out(args.out, "lossmap.csv")
    write_csv(
        out,
        ["T1", "T2", "F_opt_loss", "F_noon_loss", "F_noon_lossless", "region"],
        rows,
    )
    RunManifest.create("lossmap", _args_dict(args)).write(out)
    if not args.no_figure:
        from .report import render_lossmap_figure

        title = f"{spec.encoding.value}, N={spec.N}, nbar={spec.nbar:g}"
        render_lossmap_figure(out, grid, grid, region_grid, ratio_grid, title)
    print(str(out))
    return 0


def cmd_adapt(args) -> int:
    spec = _spec_from(args)
    channel = _channel_from(args)
    model = MeasurementModel(
        kind=MeasurementKind(args.kind), spec=spec, channel=channel
    )
    window = None
    if args.window:
        lo, hi = (float(x) for x in args.window.split(","))
        window = (lo, hi)
    config = AdaptiveConfig(
        model=model,
        objective=Objective(args.objective),
        iterations=args.iterations,
        runs=args.runs,
        phi_true=args.phi_true,
        seed=args.seed,
        control_grid=args.control_grid,
        prior_window=window,
        grid_points=args.grid_points,
    )
    summary = run_ensemble(
        config, record_trajectories=args.trajectories, threads=args.threads or 1
    )
    out = _resolve_out(args.out, "adapt.csv")
    write_csv(
        out,
        ["iter", "mean_phi_hat", "mean_var", "runs"],
        [
            (str(int(it)), ph, var, str(summary.runs))
            for it, ph, var in zip(
                summary.iterations, summary.mean_phi_hat, summary.mean_var
            )
        ],
    )
    meta = {
        "command": "adapt",
        "config": {
            "N": spec.N,
            "nbar": spec.nbar,
            "encoding": spec.encoding.value,
            "kind": args.kind,
            "T1": None if channel is None else channel.T1,
            "T2": None if channel is None else channel.T2,
            "objective": config.objective.value,
            "iterations": config.iterations,
            "runs": config.runs,
            "phi_true": config.phi_true,
            "control_grid": config.control_grid,
            "grid_points": config.grid_points,
            "prior_window": list(window) if window else None,
        },
        "seed": config.seed,
        "rng": RNG_ALGORITHM,
        "numpy_version": np.__version__,
        "tool_version": __version__,
    }
    meta_path = Path(str(out) + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    if args.trajectories:
        traj_path = out.with_name(out.stem + "_trajectories.csv")
        traj_rows = []
        for run_idx, records in enumerate(summary.trajectories):
            for rec in records:
                traj_rows.append(
                    (
                        str(run_idx),
                        str(rec.iteration),
                        str(rec.outcome),
                        rec.phi_u,
                        rec.phi_hat,
                        rec.variance,
                    )
                )
        write_csv(
            traj_path,
            ["run", "iter", "outcome", "phi_u", "phi_hat", "variance"],
            traj_rows,
        )
    RunManifest.create("adapt", _args_dict(args), seed=args.seed).write(out)
    if not args.no_figure:
        from .report import render_adapt_figure

        try:
            reference = 1.0 / closed_form_qfi(spec)
        except ValidationError:
            reference = None
        render_adapt_figure(
            out,
            summary.iterations,
            summary.mean_var,
            reference,
            f"{args.kind}, {spec.encoding.value}, nbar={spec.nbar:g}, "
            f"{config.objective.value}",
        )
    print(str(out))
    return 0


def cmd_oracle(args) -> int:
    encoding = PhaseEncoding(args.encoding)
    if args.mode == "reduced":
        problem = ReducedProblem(N=args.N, nbar=args.nbar, encoding=encoding)
        report = brute_force_reduced(problem, starts=args.starts, seed=args.seed)
    else:
        report = brute_force_full(
            args.N, args.nbar, encoding, starts=args.starts, seed=args.seed
        )
    out = _resolve_out(args.out, "oracle.json")
    out.write_text(report.to_json() + "\n")
    RunManifest.create("oracle", _args_dict(args), seed=args.seed).write(out)
    print(str(out))
    return 0


def _args_dict(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fockphase",
        description="Optimal two-mode phase estimation in finite Fock space",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", help="write the optimal probe state as JSON")
    _add_spec_flags(p)
    p.add_argument("--mzi", action="store_true",
                   help="also write the beam-splitter-rotated variant")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("qfi", help="closed-form and numeric QFI (optionally lossy)")
    _add_spec_flags(p)
    _add_channel_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_qfi)

    p = sub.add_parser("cfi", help="CFI versus phase for a measurement model")
    _add_spec_flags(p)
    _add_channel_flags(p)
    p.add_argument("--kind", choices=["parity", "photon_counting"], required=True)
    p.add_argument("--phi-u", dest="phi_u", type=float, default=0.0)
    p.add_argument("--phi-min", dest="phi_min", type=float, default=None)
    p.add_argument("--phi-max", dest="phi_max", type=float, default=None)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cfi)

    p = sub.add_parser("lossmap", help="QFI maps over (T1, T2) and robustness curves")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--nbar", type=float, default=None)
    p.add_argument("--encoding", choices=["linear", "nonlinear"], required=True)
    p.add_argument("--grid", type=int, default=41)
    p.add_argument("--robustness", action="store_true")
    p.add_argument("--thresholds", default="0.6,0.8")
    p.add_argument("--nbar-grid", dest="nbar_grid", default=None,
                   help="comma-separated nbar values for --robustness")
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lossmap)

    p = sub.add_parser("adapt", help="adaptive Bayesian estimation ensembles")
    _add_spec_flags(p)
    _add_channel_flags(p)
    p.add_argument("--kind", choices=["parity", "photon_counting"], required=True)
    p.add_argument("--objective",
                   choices=["sharpness", "mutual_information", "none"],
                   default="sharpness")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--phi-true", dest="phi_true", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--control-grid", dest="control_grid", type=int, default=720)
    p.add_argument("--grid-points", dest="grid_points", type=int, default=2000)
    p.add_argument("--window", default=None, help="prior window 'lo,hi' override")
    p.add_argument("--trajectories", action="store_true",
                   help="also write per-run trajectories")
    p.add_argument("--threads", type=int, default=0, help="0 = auto")
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("oracle", help="brute-force verification of the optima")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--nbar", type=float, required=True)
    p.add_argument("--encoding", choices=["linear", "nonlinear"], required=True)
    p.add_argument("--mode", choices=["reduced", "full"], default="reduced")
    p.add_argument("--starts", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except UnsupportedBranchError as exc:
        print(f"unsupported branch: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (NumericalError, DegenerateEvidenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
