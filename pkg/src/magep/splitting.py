"""Strang splitting of the hyperbolic and source subsystems, and Gauss-law restarts."""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import gauss_residual_norm, total_energy
from .hyperbolic import HyperbolicSolver, cfl_timestep
from .krylov import fgmres, make_preconditioner
from .scenarios import Scenario
from .source_update import SourceUpdate

log = logging.getLogger(__name__)


class RestartMode(enum.Enum):
    NONE = "none"
    FULL = "full"
    RELAXATION = "relaxation"

    @classmethod
    def parse(cls, value) -> "RestartMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown restart mode {value!r}; choose none, full or relaxation")


@dataclass
class StepRecord:
    step: int
    t: float
    tau: float
    energy_total: float
    energy_kinetic: float
    energy_field: float
    gauss_residual: float
    iterations: int
    min_rho: float
    min_e: float
    mass: float
    mass_defect: float
    substeps: int = 1
    restart_scale: float = 1.0
    extras: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = asdict(self)
        extras = row.pop("extras")
        row.update(extras)
        return row


@dataclass
class SplittingConfig:
    theta: float = 1.0
    cfl: float = 0.1
    restart: RestartMode = RestartMode.NONE
    time_integrator: str = "euler"  # or "ssprk3"
    tol: float = 1e-12
    preconditioner: str = "lu"
    tau_max: float = np.inf
    check_conservation: bool = True

    def __post_init__(self):
        self.restart = RestartMode.parse(self.restart)
        if self.time_integrator not in ("euler", "ssprk3"):
            raise ValueError(f"unknown time integrator {self.time_integrator!r}")


class Simulation:
    """State, operators and the Strang step for one scenario."""

    def __init__(self, scenario: Scenario, config: SplittingConfig, kernels=None):
        self.scenario = scenario
        self.config = config
        self.disc = scenario.disc
        self.eos = scenario.eos
        self.alpha = scenario.alpha
        self.hyp = HyperbolicSolver(self.disc, self.eos, scenario.boundary, kernels)
        bg_current = scenario.background_current
        self.source = SourceUpdate(
            self.disc,
            scenario.alpha,
            scenario.omega,
            theta=config.theta,
            tol=config.tol,
            preconditioner=config.preconditioner,
            background_current=bg_current,
        )
        self.u = np.array(scenario.u0, dtype=float)
        self.phi = np.array(scenario.phi0, dtype=float)
        self.t = 0.0
        self.step_count = 0
        self.records: list[StepRecord] = []

    # ------------------------------------------------------------ pieces
    def _rho_background(self, t):
        bg = self.scenario.background_density
        return None if bg is None else bg(t)

    def _hyperbolic_step(self, u, tau, t, residual=None):
        """One explicit step; returns the new state and tau * (boundary flux)."""
        if self.config.time_integrator == "euler":
            u1 = self.hyp.forward_euler(u, tau, t, residual=residual)
            return u1, tau * self.hyp.last_boundary_flux
        u1 = self.hyp.forward_euler(u, tau, t, residual=residual)
        f1 = self.hyp.last_boundary_flux
        u2 = 0.75 * u + 0.25 * self.hyp.forward_euler(u1, tau, t + tau)
        f2 = self.hyp.last_boundary_flux
        u3 = u / 3.0 + 2.0 / 3.0 * self.hyp.forward_euler(u2, tau, t + 0.5 * tau)
        f3 = self.hyp.last_boundary_flux
        return u3, tau * (f1 / 6.0 + f2 / 6.0 + 2.0 * f3 / 3.0)

    def _hyperbolic_advance(self, u, duration, t):
        """Advance by ``duration`` in as many CFL-limited sub-steps as needed."""
        done, n, flux = 0.0, 0, 0.0
        while duration - done > 1e-14 * duration:
            residual = self.hyp.residual(u, t + done)
            limit = cfl_timestep(residual[1].diagonal, self.disc.masses, self.config.cfl)
            tau = min(limit, duration - done)
            u, f = self._hyperbolic_step(u, tau, t + done, residual)
            flux = flux + f
            done += tau
            n += 1
        return u, n, flux

    def gauss_restart_full(self, rho, t):
        """phi solving (grad phi, grad w) = alpha <rho - rho_bg, w>_h."""
        src = self.source
        load = self.alpha * self.disc.lumped_cg_load(
            rho if self._rho_background(t) is None else rho - self._rho_background(t)
        )
        phi = src.lift()
        b = (load - self.disc.stiffness_apply(phi))[src.free]
        if src._k_prec is None:
            src._k_prec = make_preconditioner(src.preconditioner, src.K_ff)
        x, info = fgmres(lambda y: src.K_ff @ y, b, src._k_prec, tol=self.config.tol)
        phi[src.free] = x
        return phi, info

    def gauss_restart_relaxation(self, u, phi, phi_new):
        """Replace phi and lower the kinetic energy by the field-energy increase."""
        K = self.disc.stiffness_apply
        dE = (phi_new @ K(phi_new) - phi @ K(phi)) / (2.0 * self.alpha)
        rho = u[:, 0]
        m = u[:, 1:3]
        e_kin = 0.5 * float(self.disc.masses @ (np.sum(m * m, axis=1) / rho))
        if dE <= 0.0:
            return u, phi_new, 1.0
        ratio = dE / e_kin if e_kin > 0.0 else np.inf
        if ratio > 1.0:
            log.warning("relaxation restart: field energy gain %.3e exceeds kinetic %.3e", dE, e_kin)
            ratio = 1.0
        scale = np.sqrt(1.0 - ratio)
        out = u.copy()
        out[:, 1:3] = scale * m
        if u.shape[1] == 4:
            eps = u[:, 3] - 0.5 * np.sum(m * m, axis=1) / rho
            out[:, 3] = eps + 0.5 * np.sum(out[:, 1:3] ** 2, axis=1) / rho
        return out, phi_new, scale

    # ------------------------------------------------------------ stepping
    def strang_step(self, t_final=np.inf) -> StepRecord:
        u, phi, t = self.u, self.phi, self.t
        cfg = self.config
        mass0 = float(self.disc.masses @ u[:, 0])

        residual = self.hyp.residual(u, t)
        half = cfl_timestep(residual[1].diagonal, self.disc.masses, cfg.cfl, cfg.tau_max / 2.0)
        tau = min(2.0 * half, t_final - t)
        half = 0.5 * tau

        u, flux1 = self._hyperbolic_step(u, half, t, residual)
        u, phi = self.source.update_conserved(u, phi, tau, t + cfg.theta * tau)
        iterations = self.source.last_info.iterations
        u, nsub, flux2 = self._hyperbolic_advance(u, half, t + half)
        t_new = t + tau

        scale = 1.0
        if cfg.restart is not RestartMode.NONE:
            phi_new, info = self.gauss_restart_full(u[:, 0], t_new)
            iterations += info.iterations
            if cfg.restart is RestartMode.FULL:
                phi = phi_new
            else:
                u, phi, scale = self.gauss_restart_relaxation(u, phi, phi_new)

        mass1 = float(self.disc.masses @ u[:, 0])
        defect = (mass1 - mass0 + flux1[0] + flux2[0]) / abs(mass0)
        if cfg.check_conservation and abs(defect) > 1e-12:
            raise RuntimeError(f"mass conservation violated: relative defect {defect:.3e}")

        self.u, self.phi, self.t = u, phi, t_new
        self.step_count += 1
        rec = self.make_record(tau, iterations, defect, 1 + nsub, scale)
        self.records.append(rec)
        return rec

    def make_record(self, tau, iterations=0, defect=0.0, substeps=0, scale=1.0) -> StepRecord:
        u, phi = self.u, self.phi
        en = total_energy(self.disc, u, phi, self.alpha, self.eos)
        if self.eos.barotropic:
            min_e = np.nan
        else:
            min_e = float(np.min(self.eos.specific_internal_energy(u)))
        return StepRecord(
            step=self.step_count,
            t=self.t,
            tau=tau,
            energy_total=en.total,
            energy_kinetic=en.kinetic,
            energy_field=en.field,
            gauss_residual=gauss_residual_norm(
                self.disc, u[:, 0], phi, self.alpha, self._rho_background(self.t)
            ),
            iterations=iterations,
            min_rho=float(u[:, 0].min()),
            min_e=min_e,
            mass=float(self.disc.masses @ u[:, 0]),
            mass_defect=defect,
            substeps=substeps,
            restart_scale=scale,
        )

    def run(self, t_final: float, callback=None, max_steps=None, progress_every=0):
        """Step until ``t_final``; ``callback(sim, record)`` is called after every step."""
        if not self.records:
            rec = self.make_record(0.0)
            self.records.append(rec)
            if callback is not None:
                callback(self, rec)
        start = time.perf_counter()
        while self.t < t_final * (1.0 - 1e-14):
            if max_steps is not None and self.step_count >= max_steps:
                break
            rec = self.strang_step(t_final)
            if callback is not None:
                callback(self, rec)
            if progress_every and self.step_count % progress_every == 0:
                log.info(
                    "step %d t=%.5f tau=%.3e its=%d (%.1fs)",
                    rec.step, rec.t, rec.tau, rec.iterations, time.perf_counter() - start,
                )
        return self.records


def run_simulation(scenario: Scenario, config: SplittingConfig, t_final: float, callback=None):
    sim = Simulation(scenario, config)
    sim.run(t_final, callback)
    return sim
