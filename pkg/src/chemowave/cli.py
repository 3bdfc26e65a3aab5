"""Command-line surface: reproducible experiments from one config file.

Subcommands: check, wave, simulate, verify. Every run writes a JSON
manifest (deterministic given config and seed; no timing fields) plus CSV
series, and SVG figures unless --no-plots is given.

Exit codes: 0 success / all checks pass, 1 assertion failure, 2 usage or
config error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernel, simulator, supersub, wavesolver
from .grids import Field, Grid, to_csv
from .params import (ConfigError, DomainError, HypothesisError,
                     check_hypotheses, derive_bounds, kappa_star,
                     params_from_config)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NOCONV = 3

EXPERIMENTS = ("spread", "stability-e1", "stability-estar", "bump-check",
               "single-species", "wave-drift")


def _load(config_path: str):
    try:
        text = Path(config_path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    p, extras = params_from_config(text)
    seed = int(extras.get("seed", 42))
    return p, seed, text


def _write_manifest(outdir: Path, name: str, payload: dict) -> Path:
    payload = dict(payload)
    payload["tool_version"] = __version__
    path = outdir / name
    path.write_text(json.dumps(payload, indent=2, sort_keys=True,
                               allow_nan=True) + "\n")
    return path


def cmd_check(args) -> int:
    p, seed, text = _load(args.config)
    rep = check_hypotheses(p)
    der = derive_bounds(p)
    for q in rep.inequalities:
        status = "PASS" if q.holds else "FAIL"
        op = ">" if q.strict else ">="
        print(f"{q.name:4s} {status}  {q.lhs:.6g} {op} {q.rhs:.6g}  "
              f"(slack {q.slack:+.6g})")
    if rep.chi_zero_reduction:
        print("H5 evaluated through its chi-free reduction "
              "r*(ab-1)_+ <= (1-a)*(1-(d-1)_+)")
    for key, val in der.as_dict().items():
        if key != "hypotheses":
            print(f"{key} = {val}")
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_manifest(outdir, "check_manifest.json", {
        "config": text, "seed": seed,
        "hypotheses": rep.as_dict(), "derived": der.as_dict()})
    if args.require:
        wanted = [h.strip().upper() for h in args.require.split(",") if h.strip()]
        bad = [h for h in wanted if not rep.holds(h)]
        if bad:
            print(f"required hypotheses failed: {', '.join(bad)}")
            return EXIT_FAIL
    return EXIT_OK


def _emit_profile(outdir: Path, stem: str, w, plots: bool) -> None:
    to_csv(outdir / f"{stem}.csv", w.grid,
           {"U1": w.U1.values, "U2": w.U2.values, "V": w.V.values})
    if plots:
        from .plotting import save_line_plot
        save_line_plot(outdir / f"{stem}.svg", w.grid.x,
                       {"U1": w.U1.values, "U2": w.U2.values,
                        "V": w.V.values},
                       "x", "density", f"wave profile, c = {w.c:.4f}")


def cmd_wave(args) -> int:
    p, seed, text = _load(args.config)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    schedule = tuple(float(y) for y in args.domain.split(","))
    if args.min_speed_continuation:
        res = wavesolver.min_speed_continuation(p, y_schedule=schedule)
        for i, (xs, n1, n2) in enumerate(res.profiles):
            g = Grid(xs[0], xs[-1], len(xs))
            to_csv(outdir / f"continuation_{i}.csv", g, {"U1": n1, "U2": n2})
        if not args.no_plots and res.profiles:
            from .plotting import save_line_plot
            series = {f"c={res.speeds[i]:.4f}": prof[1]
                      for i, prof in enumerate(res.profiles)}
            save_line_plot(outdir / "continuation.svg", res.profiles[0][0],
                           series, "x", "U1", "normalized fronts")
        _write_manifest(outdir, "continuation_manifest.json", {
            "config": text, "seed": seed, **res.as_dict()})
        ok = (res.failure_index is None and len(res.sup_diffs) > 0
              and all(b <= a + 1e-12 for a, b in
                      zip(res.sup_diffs, res.sup_diffs[1:])))
        return EXIT_OK if ok else EXIT_FAIL
    if (args.speed is None) == (args.kappa is None):
        print("give exactly one of --speed, --kappa", file=sys.stderr)
        return EXIT_USAGE
    w = wavesolver.solve_wave(p, c=args.speed, kappa=args.kappa,
                              y_schedule=schedule, tol=args.tol)
    _emit_profile(outdir, "profile", w, not args.no_plots)
    _write_manifest(outdir, "wave_manifest.json", {
        "config": text, "seed": seed, **w.as_dict()})
    print(f"converged: c = {w.c:.6f}, kappa = {w.kappa:.6f}, "
          f"residual = {w.residual:.3g}")
    if w.tail:
        print(f"tail: fitted rate {w.tail.fitted_rate:.4f} "
              f"(target {w.tail.rate_target:.4f}), "
              f"U2 prefactor {w.tail.fitted_prefactor:.4f} "
              f"(analytic {w.tail.analytic_prefactor:.4f})")
    print(f"left limit: {w.left_limit}")
    return EXIT_OK


def _load_profile(path: Path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    manifest = json.loads((path.parent / "wave_manifest.json").read_text())
    g = Grid(float(data["x"][0]), float(data["x"][-1]), len(data["x"]))
    u1 = np.asarray(data["U1"], dtype=float)
    u2 = np.asarray(data["U2"], dtype=float)
    v = np.asarray(data["V"], dtype=float)

    class _Loaded:
        pass

    w = _Loaded()
    w.grid = g
    w.U1 = Field(g, u1, float(u1[0]), float(u1[-1]))
    w.U2 = Field(g, u2, float(u2[0]), float(u2[-1]))
    w.V = Field(g, v, float(v[0]), float(v[-1]))
    w.c = float(manifest["c"])
    w.kappa = float(manifest["kappa"])
    return w


def cmd_simulate(args) -> int:
    p, seed, text = _load(args.config)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    name = args.experiment
    plots = not args.no_plots
    report = {"config": text, "seed": seed, "experiment": name}
    passed = True
    if name == "spread":
        out = simulator.spread_experiment(p, T=args.T)
        times, fronts = out.pop("times"), out.pop("fronts")
        np.savetxt(outdir / "front_positions.csv",
                   np.column_stack([times, fronts]), delimiter=",",
                   header="t,front", comments="")
        if plots:
            from .plotting import save_line_plot
            save_line_plot(outdir / "front_positions.svg", times,
                           {"front": fronts}, "t", "front position",
                           "front propagation")
        report.update(out)
        passed = out["speed"]["speed"] >= out["c0_star"] * 0.97
    elif name in ("stability-e1", "stability-estar"):
        target = "E1" if name.endswith("e1") else "ESTAR"
        out = simulator.stability_experiment(
            p, target, amplitude=args.amplitude, T=args.T, seed=seed)
        times, dists = out.pop("times"), out.pop("distances")
        np.savetxt(outdir / "distance.csv", np.column_stack([times, dists]),
                   delimiter=",", header="t,sup_distance", comments="")
        if plots:
            from .plotting import save_line_plot
            save_line_plot(outdir / "distance.svg", times,
                           {"sup distance": dists}, "t", "distance",
                           f"relaxation to {target}")
        report.update(out)
        passed = out["passed"]
    elif name == "bump-check":
        out = simulator.bump_subsolution_check(
            p, c=args.c, q=args.q, eps=args.eps, T=args.T)
        report.update(out)
        passed = out["passed"]
    elif name == "single-species":
        sp = simulator.SingleSpeciesParams(
            a=1.0, b=1.0, d=p.d, lam=p.lam, mu=p.mu1, chi=p.chi1)
        if args.ss_init == "uniform":
            init = lambda x: np.full_like(x, 0.5)  # noqa: E731
        else:
            init = lambda x: np.where(np.abs(x) <= 5.0, 1.0, 0.0)  # noqa: E731
        out = simulator.single_species_mode(sp, init, T=args.T)
        report.update(out)
        if out["relaxation_applicable"]:
            passed = out["sup_distance"] < 1e-3
        else:
            passed = out["cone_infimum"] > 0.0
    elif name == "wave-drift":
        if not args.profile:
            print("wave-drift needs --profile pointing at a profile CSV",
                  file=sys.stderr)
            return EXIT_USAGE
        w = _load_profile(Path(args.profile))
        out = simulator.wave_drift_experiment(w, p, T=args.T)
        report.update(out)
        passed = out["drift"] < 5e-3
    else:
        print(f"unknown experiment {name!r}; valid: {', '.join(EXPERIMENTS)}",
              file=sys.stderr)
        return EXIT_USAGE
    report["passed"] = bool(passed)
    _write_manifest(outdir, f"{name}_report.json", report)
    print(json.dumps({k: v for k, v in report.items() if k != "config"},
                     indent=2, sort_keys=True))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_verify(args) -> int:
    p, seed, text = _load(args.config)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    ks = kappa_star(p)
    kappa = args.kappa if args.kappa is not None else 0.6 * ks
    if not 0 < kappa < ks:
        print(f"kappa must lie in (0, kappa*={ks:.6f})", file=sys.stderr)
        return EXIT_USAGE
    env = supersub.build_envelopes(p, kappa)
    rng = np.random.default_rng(seed)
    grid = Grid.from_h(-60.0, 120.0, 0.05)
    checks = supersub.verify_lemma3(env, p, samples=args.samples,
                                    grid=grid, rng=rng)
    bound_reports = []
    for which in ("upper", "lower"):
        u1, u2 = supersub.envelope_fields(env, grid, which)
        for rep in kernel.check_lemma_bounds(u1, u2, env, p):
            rep.name = f"{which}:{rep.name}"
            bound_reports.append(rep)
    for j in range(args.samples):
        u1, u2 = supersub.sample_E(env, grid, rng)
        for rep in kernel.check_lemma_bounds(u1, u2, env, p):
            rep.name = f"sample-{j}:{rep.name}"
            bound_reports.append(rep)
    all_ok = (all(c.passed for c in checks)
              and all(r.passed for r in bound_reports))
    with open(outdir / "verify_checks.csv", "w") as fh:
        fh.write("kind,sample,condition,worst_slack,worst_x,passed\n")
        for c in checks:
            fh.write(f"operator,{c.sample},{c.condition},{c.worst_slack},"
                     f"{c.worst_x},{c.passed}\n")
        for r in bound_reports:
            fh.write(f"kernel,{r.name},,{r.worst_slack},{r.worst_x},"
                     f"{r.passed}\n")
    _write_manifest(outdir, "verify_manifest.json", {
        "config": text, "seed": seed, "kappa": kappa,
        "envelope": env.as_dict(), "samples": args.samples,
        "all_passed": all_ok,
        "worst_operator_slack": min((c.worst_slack for c in checks),
                                    default=None),
        "worst_kernel_slack": min((r.worst_slack for r in bound_reports),
                                  default=None)})
    n_fail = sum(not c.passed for c in checks) \
        + sum(not r.passed for r in bound_reports)
    print(f"{len(checks) + len(bound_reports)} checks, {n_fail} failures")
    return EXIT_OK if all_ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemowave",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="key=value config file")
        sp.add_argument("--output-dir", default=".",
                        help="directory for manifests, CSVs, and figures")
        sp.add_argument("--no-plots", action="store_true",
                        help="skip SVG figure emission")
        sp.add_argument("--jobs", type=int, default=1,
                        help="worker bound for sweeps (reserved)")

    sp = sub.add_parser("check", help="hypotheses and derived constants")
    common(sp)
    sp.add_argument("--require", default="",
                    help="comma list of hypotheses that must hold, e.g. H1,H2")
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("wave", help="solve a traveling wave")
    common(sp)
    sp.add_argument("--speed", type=float, default=None)
    sp.add_argument("--kappa", type=float, default=None)
    sp.add_argument("--domain", default="50,100,200",
                    help="comma list of increasing truncation half-widths")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--min-speed-continuation", action="store_true")
    sp.set_defaults(fn=cmd_wave)

    sp = sub.add_parser("simulate", help="run a dynamical experiment")
    common(sp)
    sp.add_argument("experiment", choices=EXPERIMENTS)
    sp.add_argument("--T", type=float, default=200.0)
    sp.add_argument("--amplitude", type=float, default=0.1)
    sp.add_argument("--c", type=float, default=1.2)
    sp.add_argument("--q", type=float, default=1.3)
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--profile", default=None,
                    help="profile CSV from the wave subcommand (wave-drift)")
    sp.add_argument("--ss-init", choices=("bump", "uniform"), default="bump")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("verify", help="envelope and kernel bound suite")
    common(sp)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--kappa", type=float, default=None)
    sp.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DomainError, HypothesisError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (wavesolver.SolverError, simulator.SimulationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
