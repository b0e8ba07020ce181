"""Equations of state.

States are stored row-wise: ``u[:, 0]`` is the density, ``u[:, 1:3]`` the
momentum and, for the covolume gas, ``u[:, 3]`` the total mechanical energy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class InadmissibleStateError(ValueError):
    """Raised when a state has non-positive density or internal energy."""


@dataclass(frozen=True)
class CovolumeEOS:
    """Covolume (Noble-Abel) gas, p (1 - b rho) = (gamma - 1) e rho."""

    gamma: float = 1.4
    b: float = 0.0

    n_components = 4
    barotropic = False

    def __post_init__(self):
        if not (1.0 < self.gamma <= 5.0 / 3.0):
            raise ValueError(f"gamma must lie in (1, 5/3], got {self.gamma}")
        if self.b < 0.0:
            raise ValueError(f"covolume b must be >= 0, got {self.b}")

    def specific_internal_energy(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        rho = _positive_density(u)
        m2 = u[:, 1] ** 2 + u[:, 2] ** 2
        return u[:, 3] / rho - 0.5 * m2 / rho**2

    def pressure(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        e = self.specific_internal_energy(u)
        if np.any(e <= 0.0):
            raise InadmissibleStateError("non-positive specific internal energy")
        rho = u[:, 0]
        return (self.gamma - 1.0) * e * rho / (1.0 - self.b * rho)

    def sound_speed(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        p = self.pressure(u)
        rho = u[:, 0]
        return np.sqrt(self.gamma * p / (rho * (1.0 - self.b * rho)))

    def sound_speed_from(self, rho, p):
        return np.sqrt(self.gamma * p / (rho * (1.0 - self.b * rho)))

    def admissible(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        rho = u[:, 0]
        ok = rho > 0.0
        if self.b > 0.0:
            ok &= self.b * rho < 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            e = u[:, 3] / rho - 0.5 * (u[:, 1] ** 2 + u[:, 2] ** 2) / rho**2
        return ok & (e > 0.0)

    def flux(self, u: np.ndarray, p: np.ndarray | None = None) -> np.ndarray:
        """Euler flux, shape (N, 4, 2)."""
        if p is None:
            p = self.pressure(u)
        v = u[:, 1:3] / u[:, :1]
        f = np.empty((len(u), 4, 2))
        f[:, 0] = u[:, 1:3]
        f[:, 1:3] = u[:, 1:3, None] * v[:, None, :]
        f[:, 1, 0] += p
        f[:, 2, 1] += p
        f[:, 3] = v * (u[:, 3] + p)[:, None]
        return f

    def entropy(self, u: np.ndarray) -> np.ndarray:
        """Mathematical entropy -rho s with s = ln(e^(1/(gamma-1)) (1/rho - b))."""
        u = np.atleast_2d(u)
        rho = u[:, 0]
        e = self.specific_internal_energy(u)
        s = np.log(e) / (self.gamma - 1.0) + np.log(1.0 / rho - self.b)
        return -rho * s

    def from_primitive(self, rho, v, p) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1, 2)
        rho = np.broadcast_to(np.asarray(rho, dtype=float), (len(v),))
        p = np.broadcast_to(np.asarray(p, dtype=float), (len(v),))
        e = p * (1.0 - self.b * rho) / ((self.gamma - 1.0) * rho)
        u = np.empty((len(v), 4))
        u[:, 0] = rho
        u[:, 1:3] = rho[:, None] * v
        u[:, 3] = rho * e + 0.5 * rho * np.sum(v**2, axis=1)
        return u


@dataclass(frozen=True)
class IsothermalEOS:
    """Barotropic gas p = theta_T rho with state [rho, m]."""

    theta: float = 1e-4

    n_components = 3
    barotropic = True

    def __post_init__(self):
        if self.theta < 0.0:
            raise ValueError(f"temperature must be >= 0, got {self.theta}")
        if self.theta == 0.0:
            warnings.warn(
                "theta_T = 0: the velocity-only wavespeed bound keeps density "
                "positive but may not control non-smooth solutions",
                stacklevel=2,
            )

    def pressure(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        return self.theta * _positive_density(u)

    def sound_speed(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        _positive_density(u)
        return np.full(len(u), np.sqrt(self.theta))

    def sound_speed_from(self, rho, p):
        return np.full(np.shape(rho), np.sqrt(self.theta))

    def specific_internal_energy(self, u: np.ndarray) -> np.ndarray:
        """e(rho) = theta ln rho, an antiderivative of p / rho^2 up to sign."""
        u = np.atleast_2d(u)
        return self.theta * np.log(_positive_density(u))

    def admissible(self, u: np.ndarray) -> np.ndarray:
        return np.atleast_2d(u)[:, 0] > 0.0

    def flux(self, u: np.ndarray, p: np.ndarray | None = None) -> np.ndarray:
        """Barotropic flux, shape (N, 3, 2)."""
        if p is None:
            p = self.theta * u[:, 0]
        v = u[:, 1:3] / u[:, :1]
        f = np.empty((len(u), 3, 2))
        f[:, 0] = u[:, 1:3]
        f[:, 1:3] = u[:, 1:3, None] * v[:, None, :]
        f[:, 1, 0] += p
        f[:, 2, 1] += p
        return f

    def entropy(self, u: np.ndarray) -> np.ndarray:
        return entropy_pair_barotropic(u, self.theta)[0]


def _positive_density(u: np.ndarray) -> np.ndarray:
    rho = u[:, 0]
    if np.any(rho <= 0.0):
        raise InadmissibleStateError("non-positive density")
    return rho


def pressure(u, eos):
    return eos.pressure(u)


def sound_speed(u, eos):
    return eos.sound_speed(u)


def specific_internal_energy(u):
    """e = E / rho - |m|^2 / (2 rho^2) for a full covolume state."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    rho = _positive_density(u)
    return u[:, 3] / rho - 0.5 * (u[:, 1] ** 2 + u[:, 2] ** 2) / rho**2


def entropy_pair_barotropic(u, theta: float):
    """Entropy eta = |m|^2/(2 rho) + theta rho ln rho and its flux (eta + p) v."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    rho = _positive_density(u)
    m = u[:, 1:3]
    eta = 0.5 * np.sum(m**2, axis=1) / rho + theta * rho * np.log(rho)
    q = (eta + theta * rho)[:, None] * m / rho[:, None]
    return eta, q


def make_eos(kind: str, **params):
    kind = kind.lower()
    if kind in ("covolume", "ideal"):
        return CovolumeEOS(gamma=params.get("gamma", 1.4), b=params.get("b", 0.0))
    if kind in ("isothermal", "barotropic"):
        return IsothermalEOS(theta=params.get("theta", 1e-4))
    raise ValueError(f"unknown equation of state {kind!r}")
