"""Command line entry point: ``magep run | convergence | diocotron-growth``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from pathlib import Path

from .config import ConfigError, SimulationConfig, parse_config

log = logging.getLogger("magep")

GROWTH_WINDOWS = {3: (0.4, 0.7), 4: (0.6, 0.75), 5: (1.15, 1.35)}
THEORETICAL_GROWTH = {3: 0.772, 4: 0.911, 5: 0.683}


class GrowthFitError(RuntimeError):
    """Too few amplitude samples inside the fit window."""


def _limit_threads(n: int) -> None:
    # must run before numpy / scipy load their BLAS
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI file with [simulation], [numerics], ... sections")
    p.add_argument("--refinement", type=int, help="global mesh refinement level")
    p.add_argument("--mode", type=int, help="diocotron perturbation mode l")
    p.add_argument("--restart", choices=["none", "full", "relaxation"], help="Gauss-law restart")
    p.add_argument("--threads", type=int, help="BLAS / OpenMP thread count")
    p.add_argument("--output-dir", type=Path, help="directory for CSV / VTK output")
    p.add_argument("--t-final", type=float, dest="t_final", help="final time")
    p.add_argument("--theta", type=float, help="source-update theta in (0, 1]")
    p.add_argument("--cfl", type=float, help="hyperbolic CFL number in (0, 1)")
    p.add_argument("--kernels", choices=["auto", "cython", "numpy"], default="auto",
                   help="edge-kernel backend")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magep", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario and write CSV / VTK output")
    p.add_argument("scenario", nargs="?", choices=["vortex", "diocotron"],
                   help="scenario preset (may instead come from --config)")
    _add_common(p)

    p = sub.add_parser("convergence", help="vortex L1 errors over several refinements")
    p.add_argument("--levels", type=int, nargs="+", default=[5, 6, 7],
                   help="refinement levels (grid 2^r x 2^r, 4^(r+1) dofs)")
    _add_common(p)

    p = sub.add_parser("diocotron-growth", help="fit the growth rate of a diocotron mode")
    p.add_argument("--window", type=float, nargs=2, help="fit window [t_a, t_b]")
    _add_common(p)
    return parser


def config_from_args(args, scenario=None) -> SimulationConfig:
    overrides = {
        "scenario": scenario,
        "refinement": args.refinement,
        "mode": args.mode,
        "restart": args.restart,
        "threads": args.threads,
        "output_dir": None if args.output_dir is None else str(args.output_dir),
        "t_final": args.t_final,
        "theta": args.theta,
        "cfl": args.cfl,
    }
    cfg = parse_config(args.config, overrides, validate=False)
    if scenario is not None:
        cfg.scenario = scenario
    return cfg.resolved()


# ------------------------------------------------------------------ builders
def build_scenario(cfg: SimulationConfig):
    from .scenarios import DiocotronParams, VortexParams, build_diocotron, build_vortex

    if cfg.scenario == "vortex":
        if cfg.eos != "covolume" or cfg.covolume != 0.0:
            raise ConfigError("eos", "the vortex closed form needs the ideal gas (covolume 0)")
        params = VortexParams(
            speed=tuple(cfg.vortex_speed), beta=cfg.vortex_beta,
            center=tuple(cfg.vortex_center), gamma=cfg.gamma, alpha=cfg.alpha,
        )
        sc = build_vortex(cfg.refinement, params)
        sc.omega = cfg.omega
        return sc
    params = DiocotronParams(
        r0=cfg.r0, r1=cfg.r1, R=cfg.radius, rho_min=cfg.rho_min, rho_max=cfg.rho_max,
        beta=cfg.beta, delta=cfg.delta, mode=cfg.mode, theta_T=cfg.temperature,
    )
    if cfg.eos == "covolume":
        raise ConfigError("eos", "the diocotron setup uses the isothermal closure")
    return build_diocotron(cfg.refinement, params, tol=cfg.tolerance, alpha=cfg.alpha, omega=cfg.omega)


def make_simulation(cfg: SimulationConfig, kernels="auto", scenario=None):
    from .kernels import get_backend
    from .splitting import Simulation, SplittingConfig

    sc = scenario if scenario is not None else build_scenario(cfg)
    split = SplittingConfig(
        theta=cfg.theta, cfl=cfg.cfl, restart=cfg.restart, time_integrator=cfg.time_integrator,
        tol=cfg.tolerance, preconditioner=cfg.preconditioner,
    )
    backend = None if kernels == "auto" else get_backend(kernels)
    return Simulation(sc, split, kernels=backend)


# ------------------------------------------------------------------ commands
def run_command(cfg: SimulationConfig, kernels="auto") -> dict:
    from .diagnostics import CircleSampler, l1_error
    from .io import state_fields, write_csv_series, write_vtk_snapshot

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.ini")
    sim = make_simulation(cfg, kernels)
    disc = sim.disc
    sampler = CircleSampler(disc, cfg.sample_radius, cfg.samples) if cfg.scenario == "diocotron" else None
    pending = sorted(t for t in cfg.snapshot_times if t <= cfg.t_final)
    count = [0]

    def snapshot(s, tag):
        fields = state_fields(disc, s.u, s.eos)
        path = out / f"{cfg.scenario}_{tag}.vtk"
        write_vtk_snapshot(path, disc, fields, {"potential": s.phi}, title=f"{cfg.scenario} t={s.t!r}")
        return path

    def callback(s, rec):
        if sampler is not None:
            rec.extras[f"mode{cfg.mode}_amplitude"] = sampler.mode_amplitude(s.phi, cfg.mode)
        while pending and s.t >= pending[0] * (1.0 - 1e-12):
            snapshot(s, f"{count[0]:04d}")
            count[0] += 1
            pending.pop(0)

    t0 = time.perf_counter()
    sim.run(cfg.t_final, callback=callback, progress_every=50)
    elapsed = time.perf_counter() - t0
    rows = sim.records[:: cfg.csv_every]
    if rows[-1] is not sim.records[-1]:
        rows.append(sim.records[-1])
    write_csv_series(rows, out / f"{cfg.scenario}_series.csv")
    final = snapshot(sim, "final")
    summary = {"steps": sim.step_count, "t": sim.t, "seconds": elapsed, "snapshot": str(final)}
    if sim.scenario.exact is not None:
        summary["l1_error"] = l1_error(disc, sim.u, sim.scenario.exact, sim.t)
    return summary


def convergence_command(cfg: SimulationConfig, levels, kernels="auto") -> list[dict]:
    from .diagnostics import convergence_rates, l1_error
    from .io import write_csv_series

    rows = []
    for r in levels:
        c = dataclasses.replace(cfg, refinement=r)
        sim = make_simulation(c, kernels)
        t0 = time.perf_counter()
        sim.run(c.t_final)
        err = l1_error(sim.disc, sim.u, sim.scenario.exact, sim.t)
        rows.append({"refinement": r, "dofs": sim.disc.n_dg, "steps": sim.step_count,
                     "l1_error": err, "seconds": time.perf_counter() - t0})
        print(f"r={r} dofs={sim.disc.n_dg} steps={sim.step_count} delta_h={err:.6e}", flush=True)
    rates = convergence_rates([row["l1_error"] for row in rows])
    for row, rate in zip(rows[1:], rates):
        row["rate"] = rate
    for row in rows:
        print(f"{row['dofs']:>9d}  {row['l1_error']:.4e}  {row.get('rate', float('nan')):.3f}")
    write_csv_series(rows, Path(cfg.output_dir) / "convergence.csv",
                     ["refinement", "dofs", "steps", "l1_error", "rate", "seconds"])
    return rows


def growth_command(cfg: SimulationConfig, window=None, kernels="auto") -> dict:
    from .diagnostics import CircleSampler, fit_growth_rate
    from .io import write_csv_series
    from .scenarios import timescale_report

    window = tuple(window) if window else GROWTH_WINDOWS.get(cfg.mode)
    if window is None:
        raise ConfigError("mode", f"no default fit window for mode {cfg.mode}; pass --window")
    sim = make_simulation(cfg, kernels)
    sampler = CircleSampler(sim.disc, cfg.sample_radius, cfg.samples)
    times, amps = [], []

    def callback(s, rec):
        times.append(s.t)
        amps.append(sampler.mode_amplitude(s.phi, cfg.mode))

    sim.run(cfg.t_final, callback=callback, progress_every=50)
    a0 = amps[0]
    rows = [{"t": t, "amplitude": a, "normalized": a / a0} for t, a in zip(times, amps)]
    write_csv_series(rows, Path(cfg.output_dir) / f"diocotron_mode{cfg.mode}_amplitude.csv")
    try:
        gamma = fit_growth_rate(times, [a / a0 for a in amps], window)
    except ValueError as exc:
        raise GrowthFitError(f"{exc} (refine the mesh or lower --cfl for more samples)") from exc
    w_c, w_p, w_d = timescale_report(cfg.alpha, cfg.omega, cfg.rho_max)
    taus = [r.tau for r in sim.records[1:]]
    result = {
        "mode": cfg.mode, "refinement": cfg.refinement, "gamma_fit": gamma,
        "gamma_theory": THEORETICAL_GROWTH.get(cfg.mode), "window": window,
        "steps": sim.step_count, "mean_tau": sum(taus) / len(taus),
        "tau_times_omega_c": sum(taus) / len(taus) * w_c, "tau_times_omega_p": sum(taus) / len(taus) * w_p,
    }
    print(f"mode {cfg.mode}: gamma_fit = {gamma:.4f} (theory {result['gamma_theory']}) "
          f"over {window}; {sim.step_count} steps, mean tau = {result['mean_tau']:.3e} "
          f"(tau w_c = {result['tau_times_omega_c']:.2e}, tau w_p = {result['tau_times_omega_p']:.2e})")
    return result


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        _limit_threads(args.threads)
    try:
        if args.command == "run":
            cfg = config_from_args(args, args.scenario)
            summary = run_command(cfg, args.kernels)
            for k, v in summary.items():
                print(f"{k}: {v}")
        elif args.command == "convergence":
            cfg = config_from_args(args, "vortex")
            convergence_command(cfg, args.levels, args.kernels)
        else:
            cfg = config_from_args(args, "diocotron")
            growth_command(cfg, args.window, args.kernels)
    except ConfigError as exc:
        print(f"magep: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"magep: I/O error: {exc}", file=sys.stderr)
        return 3
    except GrowthFitError as exc:
        print(f"magep: growth fit failed: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
