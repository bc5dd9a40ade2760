"""Command line entry point: ``gpvortex <subcommand> ...``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or arguments.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

SCENARIOS = ("profile", "kirchhoff", "residual", "modes", "inner-correction", "wave",
             "corrected", "gpe", "compare")


class ConfigError(ValueError):
    """Validation failure; the message names the offending field."""


# ---------------------------------------------------------------- config handling

def _parse_floats(text: str, name: str) -> list[float]:
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise ConfigError(f"{name}: values must be positive")
    return vals


def vortex_config_from(obj, where: str = "config", eps: float | None = None):
    from .point_vortex import VortexConfig
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object with positions and degrees")
    for key in ("positions", "degrees"):
        if key not in obj:
            raise ConfigError(f"{where}.{key}: missing")
    pos = np.asarray(obj["positions"], dtype=float) if _is_numeric(obj["positions"]) else None
    if pos is None or pos.ndim != 2 or pos.shape[1] != 2:
        raise ConfigError(f"{where}.positions: expected a list of [x, y] pairs")
    deg = obj["degrees"]
    if not isinstance(deg, list) or len(deg) != len(pos):
        raise ConfigError(f"{where}.degrees: expected {len(pos)} entries")
    if any(d not in (1, -1) for d in deg):
        raise ConfigError(f"{where}.degrees: entries must be +1 or -1")
    e = obj.get("eps", 0.05) if eps is None else eps
    if not isinstance(e, (int, float)) or not e > 0:
        raise ConfigError(f"{where}.eps: must be a positive number")
    return VortexConfig(pos, deg, float(e))


def _is_numeric(x) -> bool:
    try:
        np.asarray(x, dtype=float)
        return True
    except (TypeError, ValueError):
        return False


def load_vortex_file(path, eps=None):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"--config: file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"--config: invalid JSON ({e})") from None
    if "vortices" in obj:
        obj = obj["vortices"]
    return vortex_config_from(obj, "config", eps)


def _echo(args, extra=None) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in ("func",) and not callable(v)}
    d.update(extra or {})
    d["backend"] = _backend_name()
    d["threads"] = int(os.environ.get("GPV_THREADS", "1"))
    return d


def _backend_name():
    from . import _backend
    return _backend.NAME


def _write_echo(out: Path, echo: dict):
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(str(out) + ".config.json", "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True, default=str)


def _save_csv(path, cols, names, extra_header=""):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names) + extra_header,
               comments="", fmt="%.12g")


# ---------------------------------------------------------------- subcommands

def cmd_profile(args):
    from .profile import ode_residual, solve_profile, write_csv
    prof = solve_profile(r_max=args.rmax, tol=args.tol)
    write_csv(prof, args.out)
    _write_echo(Path(args.out), _echo(args, {"shooting_slope": prof.shooting_slope,
                                             "ode_residual": float(np.max(np.abs(ode_residual(prof))))}))
    print(f"a = {prof.shooting_slope:.13f}, residual {prof.residual:.2e} -> {args.out}")


def cmd_kirchhoff(args):
    from .point_vortex import integrate
    cfg = load_vortex_file(args.config, args.eps)
    tr = integrate(cfg, args.tend, args.dt)
    tr.write_csv(args.out)
    _write_echo(Path(args.out), _echo(args, {"vortices": cfg.to_dict()}))
    print(f"{len(tr.t)} samples, K drift {abs(tr.K[-1] - tr.K[0]):.2e} -> {args.out}")


def cmd_residual(args):
    from .ansatz import epsilon_slope, sup_residual
    from .point_vortex import VortexConfig
    from .profile import solve_profile
    cfg = load_vortex_file(args.config)
    eps = _parse_floats(args.eps_sweep, "eps_sweep")
    prof = solve_profile(r_max=200.0)
    sups = [sup_residual(VortexConfig(cfg.positions, cfg.degrees, e), prof) for e in eps]
    slope = epsilon_slope(eps, sups) if len(eps) > 1 else float("nan")
    _save_csv(args.out, [eps, sups, np.full(len(eps), slope)],
              ["eps [1]", "sup_S [1; rescaled frame y]", "slope [1]"])
    _write_echo(Path(args.out), _echo(args, {"vortices": cfg.to_dict()}))
    print(f"slope {slope:.4f} -> {args.out}")


def cmd_modes(args):
    from .modes import basis_exponents, expected_exponents, homogeneous_basis, mode_grid
    from .profile import solve_profile
    prof = solve_profile()
    G = mode_grid()
    B = homogeneous_basis(args.k, prof, G)
    names = list(B.z)
    cols, hdr = [G.r], ["r [rescaled radius]"]
    for n in names:
        v = B[n][0]
        for i in range(v.shape[1]):
            cols.append(v[:, i])
            hdr.append(f"{n}_{i + 1} [1]")
    _save_csv(args.dump, cols, hdr)
    got, exp = basis_exponents(B), expected_exponents(args.k)
    _write_echo(Path(args.dump), _echo(args, {"exponents": got, "expected": exp,
                                              "wronskian_norm": B.wronskian_norm}))
    print(f"k={args.k}: worst exponent gap {max(abs(got[n] - exp[n]) for n in exp):.3f} -> {args.dump}")


def cmd_inner_correction(args):
    from .modes import first_inner_correction, inner_residual
    from .profile import solve_profile
    cfg = load_vortex_file(args.config, args.eps)
    if not 0 <= args.j < cfg.n:
        raise ConfigError(f"--j: must be in 0..{cfg.n - 1}")
    prof = solve_profile()
    corr = first_inner_correction(cfg, args.j, prof)
    m = 64
    th = 2 * np.pi * np.arange(m) / m
    psi = corr.field(th)
    r = corr.grid.r
    keep = r <= corr.r_cut
    R, TH = np.meshgrid(r[keep], th, indexing="ij")
    _save_csv(args.out, [R.ravel(), TH.ravel(), psi[keep].real.ravel(), psi[keep].imag.ravel()],
              ["r [rescaled radius about xi_j/eps]", "theta [rad]", "re_psi [1]", "im_psi [1]"])
    res = inner_residual(corr, prof)
    _write_echo(Path(args.out), _echo(args, {"vortices": cfg.to_dict(), "residual": res, "sup": corr.sup()}))
    print(f"sup |psi| = {corr.sup():.4e}, residual {res:.2e} -> {args.out}")


def cmd_wave(args):
    from .acceptance import wave_sources
    from .wave import WaveSource, growth_curve
    if args.source == "file":
        if not args.table:
            raise ConfigError("--table: required for --source file")
        src = _tabulated_source(args.table)
    else:
        src = wave_sources()[{"quad": "quadratic", "lin": "linear", "compact": "compact"}[args.source]]
    probes = [(float(p.split(":")[0]), float(p.split(":")[1])) for p in args.probes.split(",")]
    gc = growth_curve(src, args.tau_max, probes)
    gc.write_csv(args.out)
    _write_echo(Path(args.out), _echo(args, {"best": gc.best, "admissible": gc.admissible, "fits": gc.fits}))
    print(f"best law {gc.best}, admissible {gc.admissible} -> {args.out}")


def _tabulated_source(path):
    """Stationary radial source from a two-column CSV (r, F)."""
    from .wave import WaveSource
    tab = np.loadtxt(path, delimiter=",", skiprows=1)
    r, f = tab[:, 0], tab[:, 1]
    fun = lambda X, Y, t: np.interp(np.hypot(X, Y), r, f, right=0.0)
    return WaveSource(fun, "compact", radius=float(r[-1]), length=float(np.min(np.diff(r))) * 4)


def cmd_corrected(args):
    from .profile import solve_profile
    from .radiation import integrate_corrected
    cfg = load_vortex_file(args.config, args.eps)
    prof = solve_profile() if args.fidelity == "extended" else None
    ct = integrate_corrected(cfg, args.tend, args.dt, args.fidelity, prof)
    ct.write_csv(args.out)
    _write_echo(Path(args.out), _echo(args, {"vortices": cfg.to_dict(),
                                             "max_deviation": float(ct.deviation().max())}))
    print(f"max |xi* - xi0| = {ct.deviation().max():.4e} -> {args.out}")


def cmd_gpe(args):
    from .gpe import deviation, kirchhoff_on, min_points, run_gpe
    from .profile import solve_profile
    cfg = load_vortex_file(args.config, args.eps)
    N = args.N or min_points(args.L, cfg.eps)
    dt = args.dt or 0.5 * cfg.eps**2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = run_gpe(cfg, args.tend, args.L, solve_profile(r_max=200.0), N=N, dt=dt, sample_dt=args.sample)
    if args.track:
        run.trajectory().write_csv(out / "trajectory.csv")
    ref = kirchhoff_on(run, cfg)
    dev = deviation(run, ref)
    _save_csv(out / "deviation.csv", [run.t, dev, run.energy[: len(run.t)]],
              ["t [physical time]", "max_dev [physical x]", "energy [torus energy]"])
    if args.snapshot:
        run.final.field().dump(out / "final_field")
    echo = _echo(args, {"vortices": cfg.to_dict(), "N": N, "dt": dt, "mass_drift": run.mass_drift,
                        "flagged": run.flagged, "note": run.note})
    with open(out / "config.json", "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True, default=str)
    print(f"max deviation {dev.max():.4e}, mass drift {run.mass_drift:.1e} -> {out}")
    if run.flagged:
        raise RuntimeError(f"run flagged: {run.note}")


def cmd_compare(args):
    from .gpe import compare_reduced
    from .profile import solve_profile
    cfg = load_vortex_file(args.config)
    eps = _parse_floats(args.eps_sweep, "eps_sweep")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tab = compare_reduced(cfg, args.tend, eps, args.L, solve_profile(r_max=200.0), sample_dt=args.sample)
    tab.write_csv(out / "compare.csv")
    with open(out / "config.json", "w") as fh:
        json.dump(_echo(args, {"vortices": cfg.to_dict(), "slope": tab.slope}), fh, indent=2,
                  sort_keys=True, default=str)
    print(f"slope {tab.slope:.3f} -> {out}")


def cmd_accept(args):
    from .acceptance import report, run_all
    which = [int(x) for x in args.only.split(",")] if args.only else None
    results = run_all(which)
    for r in results:
        print(r.line())
    rep = report(results)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump(rep, fh, indent=2)
    return 0 if rep["passed"] else 1


def cmd_run(args):
    """Run one scenario from an experiment file into its output directory."""
    try:
        with open(args.file) as fh:
            exp = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{args.file}: not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{args.file}: invalid JSON ({e})") from None
    if not isinstance(exp, dict):
        raise ConfigError("experiment: expected a JSON object")
    scen = exp.get("scenario")
    if scen not in SCENARIOS:
        raise ConfigError(f"scenario: must be one of {', '.join(SCENARIOS)}")
    outdir = Path(exp.get("output", "run_out"))
    params = exp.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params: expected an object")
    seed = exp.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed: must be an integer")
    outdir.mkdir(parents=True, exist_ok=True)
    argv = [scen]
    if "vortices" in exp:
        cfg = vortex_config_from(exp["vortices"], "vortices")
        cpath = outdir / "vortices.json"
        with open(cpath, "w") as fh:
            json.dump(cfg.to_dict(), fh, indent=2)
        argv += ["--config", str(cpath)]
    default_out = {"profile": "profile.csv", "kirchhoff": "traj.csv", "residual": "residual_scaling.csv",
                   "inner-correction": "psi11.csv", "wave": "growth.csv", "corrected": "corrected.csv"}
    for key, val in params.items():
        if key in ("out", "dump", "config"):
            raise ConfigError(f"params.{key}: set by the runner")
        argv += [f"--{key.replace('_', '-')}", str(val)] if not isinstance(val, bool) else \
            ([f"--{key.replace('_', '-')}"] if val else [])
    if scen == "modes":
        argv += ["--dump", str(outdir / "basis.csv")]
    elif scen in ("gpe", "compare"):
        argv += ["--out", str(outdir)]
    else:
        argv += ["--out", str(outdir / default_out[scen])]
    with open(outdir / "experiment.json", "w") as fh:
        json.dump({"scenario": scen, "params": params, "seed": seed, "output": str(outdir),
                   "vortices": exp.get("vortices")}, fh, indent=2, sort_keys=True)
    np.random.seed(seed)  # no module draws from the global state; kept for third-party code paths
    return main(argv)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpvortex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("profile", help="solve the degree-one vortex profile")
    s.add_argument("--rmax", type=float, default=60.0)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--out", default="profile.csv")
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("kirchhoff", help="integrate the point-vortex system")
    s.add_argument("--config", required=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--tend", type=float, default=1.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--out", default="traj.csv")
    s.set_defaults(func=cmd_kirchhoff)

    s = sub.add_parser("residual", help="sup |S(U)| over an eps sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--eps-sweep", default="0.05,0.025,0.0125")
    s.add_argument("--out", default="residual_scaling.csv")
    s.set_defaults(func=cmd_residual)

    s = sub.add_parser("modes", help="homogeneous basis for one angular mode")
    s.add_argument("--k", type=int, default=2, choices=range(0, 9))
    s.add_argument("--dump", default="basis.csv")
    s.set_defaults(func=cmd_modes)

    s = sub.add_parser("inner-correction", help="first inner correction around vortex j")
    s.add_argument("--config", required=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--j", type=int, default=0)
    s.add_argument("--out", default="psi11.csv")
    s.set_defaults(func=cmd_inner_correction)

    s = sub.add_parser("wave", help="growth curve of a Duhamel solution")
    s.add_argument("--source", choices=("quad", "lin", "compact", "file"), default="quad")
    s.add_argument("--table", help="CSV (r, F) for --source file")
    s.add_argument("--tau-max", type=float, default=100.0)
    s.add_argument("--probes", default="0:0,1:0,3:0")
    s.add_argument("--out", default="growth.csv")
    s.set_defaults(func=cmd_wave)

    s = sub.add_parser("corrected", help="radiation-corrected vortex law")
    s.add_argument("--config", required=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--tend", type=float, default=1.0)
    s.add_argument("--dt", type=float, default=0.02)
    s.add_argument("--fidelity", choices=("leading", "extended"), default="leading")
    s.add_argument("--out", default="corrected.csv")
    s.set_defaults(func=cmd_corrected)

    s = sub.add_parser("gpe", help="Gross-Pitaevskii run with zero tracking")
    s.add_argument("--config", required=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--L", type=float, default=20.0)
    s.add_argument("--N", type=int)
    s.add_argument("--tend", type=float, default=0.25)
    s.add_argument("--dt", type=float)
    s.add_argument("--sample", type=float, default=0.025)
    s.add_argument("--track", action="store_true")
    s.add_argument("--snapshot", action="store_true")
    s.add_argument("--out", default="gpe_run")
    s.set_defaults(func=cmd_gpe)

    s = sub.add_parser("compare", help="GPE vs Kirchhoff over an eps sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--eps-sweep", default="0.1,0.05")
    s.add_argument("--L", type=float, default=20.0)
    s.add_argument("--tend", type=float, default=0.25)
    s.add_argument("--sample", type=float, default=0.025)
    s.add_argument("--out", default="compare_out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("accept", help="run the acceptance criteria and write a JSON report")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.add_argument("--out", default="acceptance_report.json")
    s.set_defaults(func=cmd_accept)

    s = sub.add_parser("run", help="run an experiment file")
    s.add_argument("file")
    s.set_defaults(func=cmd_run)
    return p


def _cap_threads():
    n = os.environ.get("GPV_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def main(argv=None) -> int:
    _cap_threads()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse uses 2 for usage errors
        return int(e.code or 0)
    try:
        rc = args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as e:
        # module preconditions (degrees, resolution, box) are validation failures
        print(f"invalid input: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
