"""Shared primitives: parameter domains, time grids, dynamical systems."""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools

import numpy as np


class DomainError(ValueError):
    """Parameter vector lies outside the admissible box."""


class EvaluationError(RuntimeError):
    """A model evaluation produced non-finite or ill-shaped output."""


class CapabilityError(RuntimeError):
    """The requested operation is not supported by this object (e.g. no Jacobian)."""


class ConvergenceError(RuntimeError):
    """An iterative solve exhausted its iteration budget without converging."""

    def __init__(self, message: str, step: int = -1, residual: float = float("nan")):
        super().__init__(message)
        self.step = step
        self.residual = residual


class DivergenceError(EvaluationError):
    """A trajectory left the finite range; carries the offending step index."""

    def __init__(self, message: str, step: int = -1):
        super().__init__(message)
        self.step = step


class StageError(RuntimeError):
    """A pipeline stage cannot run because a prerequisite artifact is missing."""


@dataclass(frozen=True)
class ParameterDomain:
    """Axis-aligned box of admissible parameters.

    Parameters
    ----------
    lows, highs : array_like
        Lower/upper bounds per coordinate, same length, lows < highs
        componentwise.
    names : tuple of str, optional
        Coordinate labels used in reports.
    """

    lows: np.ndarray
    highs: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lows, dtype=float))
        hi = np.atleast_1d(np.asarray(self.highs, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be 1d arrays of equal length")
        if not np.all(lo < hi):
            raise ValueError("need lows < highs componentwise")
        object.__setattr__(self, "lows", lo)
        object.__setattr__(self, "highs", hi)
        if self.names and len(self.names) != lo.size:
            raise ValueError("names length mismatch")

    @property
    def dim(self) -> int:
        return self.lows.size

    def contains(self, mu) -> bool:
        mu = np.asarray(mu, dtype=float)
        return bool(
            mu.shape == self.lows.shape
            and np.all(mu >= self.lows)
            and np.all(mu <= self.highs)
        )

    def check(self, mu) -> np.ndarray:
        """Validate and return mu as a float array, raising DomainError if outside."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if mu.shape != self.lows.shape:
            raise DomainError(
                f"parameter has shape {mu.shape}, expected {self.lows.shape}"
            )
        if not (np.all(mu >= self.lows) and np.all(mu <= self.highs)):
            raise DomainError(f"parameter {mu} outside box [{self.lows}, {self.highs}]")
        return mu

    def scale01(self, mu) -> np.ndarray:
        """Map a point of the box onto the unit cube."""
        mu = np.asarray(mu, dtype=float)
        return (mu - self.lows) / (self.highs - self.lows)

    def unscale01(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.lows + u * (self.highs - self.lows)

    def corners(self) -> np.ndarray:
        """All 2**dim corner points, lexicographic in (low, high) per axis."""
        axes = [(lo, hi) for lo, hi in zip(self.lows, self.highs)]
        return np.array(list(itertools.product(*axes)))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of num_steps steps on [t0, t_final]."""

    t0: float
    t_final: float
    num_steps: int

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError("need at least one step")
        if not self.t_final > self.t0:
            raise ValueError("need t_final > t0")

    @property
    def dt(self) -> float:
        return (self.t_final - self.t0) / self.num_steps

    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t_final, self.num_steps + 1)


class DynamicalSystem:
    """Base class for parameterized ODE systems dx/dt = f(x, t; mu).

    Subclasses set ``dim``, ``domain`` and ``t_final`` and implement
    ``velocity`` and ``initial_state``. ``jacobian`` falls back to central
    finite differences; override it with an analytic (possibly sparse)
    version when available.
    """

    dim: int
    domain: ParameterDomain
    t_final: float

    def velocity(self, x: np.ndarray, t: float, mu: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def initial_state(self, mu: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x: np.ndarray, t: float, mu: np.ndarray):
        return fd_jacobian(lambda y: self.velocity(y, t, mu), x)

    def time_grid(self, num_steps: int) -> TimeGrid:
        return TimeGrid(0.0, self.t_final, num_steps)


def fd_jacobian(f, x: np.ndarray, scale: float = 1e-6) -> np.ndarray:
    """Dense Jacobian of f at x by central differences.

    The step in coordinate j is scale*(1 + |x_j|) so that both tiny and
    large states get a sensible relative perturbation.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = scale * (1.0 + abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h)
    return jac


def require_finite(arr: np.ndarray, what: str = "array") -> np.ndarray:
    """Raise EvaluationError if arr contains NaN or inf."""
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{what} contains non-finite entries")
    return arr
