"""Command-line entry point: run experiments, verify, plot, tabulate kernels.

Exit status: 0 when every configured check passes, 2 when any check fails,
1 on an execution error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_dict, emit_config, parse_config
from .errors import FrackppError
from .evolve import GradedGrid, Trajectory, required_half_width, run, theory_constants
from .fronts import check_invasion, default_window, fit_rate, sandwich, stretch_diagnostic
from .kernel import build_tabulation, save_tabulation
from .operators import SingularIntegralOperator
from .verify import (
    AlgebraicProfile,
    heuristic_comparison,
    lower_bound_check,
    profile_residual_sign,
    profile_sweep,
    supersolution_check,
)

logger = logging.getLogger("frackpp")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _g17(v) -> str:
    return format(float(v), ".17g")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n")
    return path


def derived_constants(exp: ExperimentConfig) -> dict:
    sim = exp.simulation
    out = theory_constants(sim.alpha, sim.growth_rate)
    out["required_half_width"] = required_half_width(sim)
    out["steps"] = sim.steps
    out["grid_nodes"] = GradedGrid.symmetric(sim.grid).size
    return out


# ---------------------------------------------------------------------------
# artefact writers


def write_snapshots(traj: Trajectory, out: Path) -> list[Path]:
    d = out / "snapshots"
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, snap in enumerate(traj.snapshots):
        p = d / f"snapshot_{k:04d}.csv"
        with open(p, "w", newline="") as fh:
            fh.write(f"# t={_g17(snap.t)} u_left={_g17(snap.u_left)} u_right={_g17(snap.u_right)}\n")
            fh.write("x,u\n")
            for xi, ui in zip(snap.grid.x, snap.values):
                fh.write(f"{_g17(xi)},{_g17(ui)}\n")
        paths.append(p)
    return paths


def write_traces(traj: Trajectory, out: Path) -> Path:
    p = out / "fronts.csv"
    with open(p, "w", newline="") as fh:
        fh.write("t,lambda,x_minus,x_plus\n")
        for lam in sorted(traj.traces):
            for t, lv, xm, xp in traj.traces[lam].rows():
                fh.write(f"{_g17(t)},{_g17(lv)},{_g17(xm)},{_g17(xp)}\n")
    return p


def read_traces(path: Path) -> dict:
    """fronts.csv -> {λ: (t, x_minus, x_plus)} arrays."""
    rows: dict = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(float(r["lambda"]), []).append(
                (float(r["t"]), float(r["x_minus"]), float(r["x_plus"]))
            )
    return {lam: tuple(np.array(c) for c in zip(*v)) for lam, v in rows.items()}


# ---------------------------------------------------------------------------
# checks


def _check(passed: bool, **info) -> dict:
    return {"passed": bool(passed), **info}


def evaluate_checks(exp: ExperimentConfig, traj: Trajectory) -> tuple[dict, dict]:
    """Run every configured check; returns (summary, detailed reports)."""
    sim, fr, ck = exp.simulation, exp.fronts, exp.checks
    consts = theory_constants(sim.alpha, sim.growth_rate)
    c_theory = consts["c_star"] if sim.initial == "compact" else consts["c_star_star"]
    times = traj.traces[fr.fit_level].times
    window = fr.window or default_window(times)
    summary, reports = {}, {}

    rates = {}
    for lam, trace in sorted(traj.traces.items()):
        try:
            rates[str(lam)] = fit_rate(trace, fr.model, window, fr.side).to_dict()
        except FrackppError as exc:
            rates[str(lam)] = {"error": str(exc)}
    reports["rates"] = rates
    if ck.expected_rate is not None:
        est = rates[str(fr.fit_level)]
        ok = "rate" in est and abs(est["rate"] - ck.expected_rate) <= ck.rate_tolerance
        summary["rate"] = _check(ok, value=est.get("rate"), target=ck.expected_rate,
                                 tolerance=ck.rate_tolerance, model=fr.model, window=list(window))

    t_end = float(times[-1])
    if ck.sandwich_band is not None:
        win = ck.sandwich_window or (t_end - (t_end - float(times[0])) / 3.0, t_end)
        rep = sandwich(list(traj.traces.values()), c_theory, win, fr.side)
        wwin = ck.widening_window or win
        wid = sandwich(list(traj.traces.values()), c_theory, wwin, fr.side)
        ok = rep.band_constant <= ck.sandwich_band and wid.spread_end <= wid.spread_start + ck.widening_slack
        reports["sandwich"] = rep.to_dict()
        reports["widening"] = wid.to_dict()
        summary["sandwich"] = _check(ok, band_constant=rep.band_constant, target=ck.sandwich_band,
                                     max_over_min=rep.max_over_min, spread_start=wid.spread_start,
                                     spread_end=wid.spread_end)

    geometry = "compact" if sim.initial == "compact" else "monotone"
    for c in ck.invasion_rates:
        rep = check_invasion(traj.snapshots, c, c_theory, geometry, ck.invasion_threshold)
        reports[f"invasion_{c:g}"] = rep.to_dict()
        summary[f"invasion_{c:g}"] = _check(rep.passed, region=rep.region,
                                            final=rep.values[-1] if rep.values else None,
                                            inconclusive=rep.inconclusive)

    if ck.stretch_rate is not None:
        lo, hi = min(traj.traces), max(traj.traces)
        try:
            rep = stretch_diagnostic(traj.traces[lo], traj.traces[hi], window, fr.side)
            ok = abs(rep.rate - ck.stretch_rate) <= ck.stretch_tolerance
            reports["stretch"] = rep.to_dict()
            summary["stretch"] = _check(ok, value=rep.rate, target=ck.stretch_rate,
                                        tolerance=ck.stretch_tolerance)
        except FrackppError as exc:
            summary["stretch"] = _check(False, error=str(exc))

    if ck.supersolution:
        rep = supersolution_check(traj)
        reports["supersolution"] = rep.to_dict()
        summary["supersolution"] = _check(rep.passed, max_defect=max(rep.max_defect),
                                          final_margin=rep.margin[-1])

    if ck.lower_bound_sigma is not None:
        rep = lower_bound_check(traj, ck.lower_bound_sigma, ck.lower_bound_epsilon)
        reports["lower_bound"] = rep.to_dict()
        summary["lower_bound"] = _check(rep.passed, late_minimum=rep.late_minimum,
                                        epsilon=ck.lower_bound_epsilon, inconclusive=rep.inconclusive)
    return summary, reports


# ---------------------------------------------------------------------------
# orchestration


def run_experiment(exp: ExperimentConfig, out: Path, threads: int | None = None,
                   verify_profiles: bool = False) -> dict:
    """Run, fit, verify and write all artefacts plus ``manifest.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    files: list[Path] = []
    cfg_path = out / "config.toml"
    cfg_path.write_text(emit_config(exp))
    files.append(cfg_path)
    manifest = {
        "version": __version__,
        "name": exp.name,
        "config": config_dict(exp),
        "output_dir": str(out),
        "constants": theory_constants(exp.simulation.alpha, exp.simulation.growth_rate),
    }
    try:
        traj = run(exp.simulation, threads=threads)
        files += write_snapshots(traj, out)
        files.append(write_traces(traj, out))
        summary, reports = evaluate_checks(exp, traj)
        files.append(_write_json(out / "rates.json", reports.pop("rates")))
        if exp.simulation.alpha < 1.0 and exp.simulation.initial == "compact":
            try:
                reports["heuristic"] = heuristic_comparison(traj, exp.fronts.fit_level).to_dict()
            except FrackppError as exc:
                reports["heuristic"] = {"error": str(exc)}
        if verify_profiles:
            files += write_profile_residuals(exp, out, reports)
        files.append(_write_json(out / "checks.json", reports))
        manifest["run"] = {
            "grid_nodes": traj.grid.size,
            "steps": exp.simulation.steps,
            "row_defect": traj.row_defect,
            "linear_clamps": traj.stats.clamped,
            "linear_max_excursion": traj.stats.max_excursion,
            "reaction_clamps": traj.reaction_clamps,
        }
        manifest["acceptance"] = summary
        manifest["status"] = "pass" if all(v["passed"] for v in summary.values()) else "fail"
    except FrackppError as exc:
        logger.error("run failed: %s", exc)
        manifest["status"] = "error"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
    manifest["elapsed_seconds"] = time.perf_counter() - started
    manifest["files"] = [
        {"path": str(p.relative_to(out)), "sha256": _sha256(p), "bytes": p.stat().st_size} for p in files
    ]
    _write_json(out / "manifest.json", manifest)
    return manifest


def write_profile_residuals(exp: ExperimentConfig, out: Path, reports: dict) -> list[Path]:
    """Residual-sign map of the algebraic profile family (α=1/2 only)."""
    sim = exp.simulation
    if sim.alpha != 0.5:
        reports["profile"] = {"skipped": "algebraic profiles are checked for alpha = 1/2 only"}
        return []
    op = SingularIntegralOperator(0.5)
    times = np.linspace(0.0, sim.t_final, 8)
    xs = np.concatenate([-np.geomspace(1e-2, 1e5, 40)[::-1], [0.0], np.geomspace(1e-2, 1e5, 40)])
    rep = profile_residual_sign(AlgebraicProfile(1.0, 1.0, 0.5, "sub"), op, sim.make_reaction(), times, xs)
    p = out / "profile_residuals.csv"
    with open(p, "w", newline="") as fh:
        fh.write("t,x,residual\n")
        for t, x, r in rep.rows():
            fh.write(f"{_g17(t)},{_g17(x)},{_g17(r)}\n")
    reports["profile"] = rep.to_dict()
    sweep = {}
    for orientation in ("super", "sub"):
        entries = profile_sweep((0.25, 0.5, 1.0), (0.5, 1.0, 2.0, 4.0), op, sim.make_reaction(),
                                times, xs, 0.5, orientation)
        sweep[orientation] = [asdict(e) for e in entries]
    reports["profile_sweep"] = sweep
    return [p]


def exit_code(manifest: dict) -> int:
    return {"pass": EXIT_OK, "fail": EXIT_FAIL}.get(manifest.get("status"), EXIT_ERROR)


# ---------------------------------------------------------------------------
# plot data


def emit_plots(manifests, out: Path) -> list[Path]:
    """Write gnuplot data and a script for one or more finished runs."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    plots: list[str] = []
    overlay = []
    for m in manifests:
        run_dir = Path(m["output_dir"])
        missing = [f["path"] for f in m.get("files", []) if not (run_dir / f["path"]).exists()]
        if missing:
            raise FileNotFoundError(f"missing run outputs: {', '.join(missing)}")
        tag = m["name"]
        fronts_csv = run_dir / "fronts.csv"
        if not fronts_csv.exists():
            raise FileNotFoundError(f"missing run outputs: {fronts_csv}")
        traces = read_traces(fronts_csv)
        sim = m["config"]
        alpha = sim["kernel"]["alpha"]
        rate = m["constants"]["c_star" if sim["initial"]["kind"] == "compact" else "c_star_star"]
        side = sim["fronts"].get("side", "plus")
        col = 2 if side == "plus" else 1
        usable = {lam: tr for lam, tr in traces.items() if np.any(np.isfinite(tr[col]))}
        if not usable:
            logger.warning("run %s has empty traces; plots skipped", tag)
            continue
        front = out / f"{tag}_fronts.dat"
        ratio = out / f"{tag}_ratio.dat"
        with open(front, "w") as ff, open(ratio, "w") as fr:
            ff.write("# t lambda |x_lambda| (one block per level)\n")
            fr.write(f"# t lambda |x_lambda| exp(-{rate!r} t)\n")
            for lam, (t, xm, xp) in sorted(usable.items()):
                pos = np.abs(xp if side == "plus" else xm)
                for ti, pi in zip(t, pos):
                    if math.isfinite(pi) and pi > 0:
                        ff.write(f"{_g17(ti)} {_g17(lam)} {_g17(pi)}\n")
                        fr.write(f"{_g17(ti)} {_g17(lam)} {_g17(pi * math.exp(-rate * ti))}\n")
                ff.write("\n\n")
                fr.write("\n\n")
        snaps = sorted((run_dir / "snapshots").glob("snapshot_*.csv"))
        snap_dat = out / f"{tag}_snapshots.dat"
        with open(snap_dat, "w") as fh:
            for sp in snaps:
                with open(sp) as src:
                    header = src.readline().strip()
                    fh.write(f"{header}\n")
                    next(src)
                    for line in src:
                        fh.write(line.replace(",", " "))
                fh.write("\n\n")
        written += [front, ratio, snap_dat]
        lam = sim["fronts"].get("fit_level", 0.5)
        lam = lam if lam in usable else sorted(usable)[len(usable) // 2]
        t, xm, xp = usable[lam]
        overlay.append((tag, alpha, lam, t, np.abs(xp if side == "plus" else xm)))
        levels = sorted(usable)
        plots.append(_gnuplot_run(tag, front.name, ratio.name, snap_dat.name, levels, len(snaps)))
    if len(overlay) > 1:
        ov = out / "overlay_fronts.dat"
        with open(ov, "w") as fh:
            for tag, alpha, lam, t, pos in overlay:
                fh.write(f"# run {tag} alpha={alpha!r} lambda={lam!r}\n")
                for ti, pi in zip(t, pos):
                    if math.isfinite(pi) and pi > 0:
                        fh.write(f"{_g17(ti)} {_g17(pi)}\n")
                fh.write("\n\n")
        written.append(ov)
        lines = ", ".join(f"'{ov.name}' index {i} using 1:2 with lines title '{o[0]}'" for i, o in enumerate(overlay))
        plots.append(f"set output 'overlay.png'\nset logscale y\nset title 'front positions'\nplot {lines}\nunset logscale y\n")
    script = out / "plots.gp"
    script.write_text("set terminal pngcairo size 900,600\nset key left top\n" + "\n".join(plots))
    written.append(script)
    return written


def _gnuplot_run(tag, front, ratio, snaps, levels, nsnap) -> str:
    fl = ", ".join(f"'{front}' index {i} using 1:3 with lines title 'lambda={lam:g}'" for i, lam in enumerate(levels))
    rl = ", ".join(f"'{ratio}' index {i} using 1:3 with lines title 'lambda={lam:g}'" for i, lam in enumerate(levels))
    sl = ", ".join(f"'{snaps}' index {i} using 1:2 with lines notitle" for i in range(nsnap))
    return (
        f"set output '{tag}_fronts.png'\nset logscale y\nset xlabel 't'\nset title '{tag}: |x_lambda(t)|'\n"
        f"plot {fl}\nunset logscale y\n"
        f"set output '{tag}_ratio.png'\nset title '{tag}: ratio to exp(c t)'\nplot {rl}\n"
        f"set output '{tag}_snapshots.png'\nset logscale x\nset xrange [1e-2:*]\nset xlabel 'x'\n"
        f"set title '{tag}: snapshots'\nplot {sl}\nunset logscale x\nset xrange [*:*]\n"
    )


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="frackpp", description="Fractional Fisher-KPP front laboratory")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "run an experiment and its acceptance checks"),
                      ("verify", "run an experiment plus the algebraic-profile residual map")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output directory (default runs/<name>)")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--dry-run", action="store_true", help="validate and print derived constants only")
    p = sub.add_parser("plot", help="emit gnuplot data and script for finished runs")
    p.add_argument("runs", nargs="+", help="run output directories")
    p.add_argument("--out", default="plots")
    p = sub.add_parser("tabulate-kernel", help="tabulate p(1, r) for a given alpha")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", default=None, help="base path without suffix")
    p.add_argument("--dry-run", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("run", "verify"):
            exp = parse_config(args.config)
            if args.dry_run:
                print(json.dumps({"name": exp.name, **derived_constants(exp)}, indent=2, sort_keys=True))
                return EXIT_OK
            out = Path(args.out) if args.out else Path("runs") / exp.name
            manifest = run_experiment(exp, out, args.threads, verify_profiles=args.command == "verify")
            for key, val in manifest.get("acceptance", {}).items():
                print(f"{'PASS' if val['passed'] else 'FAIL'} {key}")
            if "error" in manifest:
                print(f"ERROR {manifest['error']}", file=sys.stderr)
            print(f"status: {manifest['status']} ({out / 'manifest.json'})")
            return exit_code(manifest)
        if args.command == "plot":
            manifests = []
            for d in args.runs:
                mp = Path(d) / "manifest.json"
                if not mp.exists():
                    raise FileNotFoundError(f"missing run outputs: {mp}")
                manifests.append(json.loads(mp.read_text()))
            for p in emit_plots(manifests, Path(args.out)):
                print(p)
            return EXIT_OK
        if args.command == "tabulate-kernel":
            if args.dry_run:
                print(json.dumps({"alpha": args.alpha}))
                return EXIT_OK
            k = build_tabulation(args.alpha)
            base = Path(args.out) if args.out else Path(f"kernel_alpha_{args.alpha:g}")
            base.parent.mkdir(parents=True, exist_ok=True)
            for p in save_tabulation(k, base):
                print(p)
            return EXIT_OK
    except (FrackppError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
