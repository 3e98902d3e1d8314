"""Regression surrogates packaged as reduced dynamical systems.

``RegressionROM`` makes a fitted regressor interchangeable with the
projected model for the integrators: its velocity is the regressor's
prediction at (xhat, t, mu), its Jacobian (when the family has one) is
the state block of the regressor's full input Jacobian. The adapter also
counts how often the integrator queries the model outside its training
box, the extrapolation diagnostic reported with each solve.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import DynamicalSystem
from .integration import TimeGrid, TrajectoryResult, backward_euler_step
from .reduction import ReducedBasis
from .regressors.base import FittedRegressor


class RegressionROM(DynamicalSystem):
    def __init__(
        self,
        system: DynamicalSystem,
        basis: ReducedBasis,
        model: FittedRegressor,
        label: Optional[str] = None,
    ):
        expected = basis.n + 1 + system.domain.dim
        if model.input_dim != expected:
            raise ValueError(
                f"model takes {model.input_dim} inputs, reduced system needs {expected}"
            )
        self.system = system
        self.basis = basis
        self.model = model
        self.label = label or model.spec.label
        self.dim = basis.n
        self.domain = system.domain
        self.t_final = system.t_final
        self.n_evals = 0
        self.n_outside = 0

    @property
    def differentiable(self) -> bool:
        return self.model.differentiable

    def _joint(self, xhat, t, mu) -> np.ndarray:
        return np.concatenate([np.asarray(xhat, float), [float(t)], np.asarray(mu, float)])

    def initial_state(self, mu) -> np.ndarray:
        return self.basis.project(self.system.initial_state(mu))

    def velocity(self, xhat, t, mu) -> np.ndarray:
        z = self._joint(xhat, t, mu)
        self.n_evals += 1
        if not self.model.in_box(z):
            self.n_outside += 1
        return self.model.predict(z)

    def jacobian(self, xhat, t, mu) -> np.ndarray:
        full = self.model.jacobian(self._joint(xhat, t, mu))
        return full[:, : self.dim]

    def extrapolation_fraction(self) -> float:
        return self.n_outside / self.n_evals if self.n_evals else 0.0

    def reset_diagnostics(self) -> None:
        self.n_evals = 0
        self.n_outside = 0


def iterate_flow_map(
    system: DynamicalSystem,
    basis: ReducedBasis,
    model: FittedRegressor,
    grid: TimeGrid,
    mu,
) -> TrajectoryResult:
    """Roll a fitted flow map forward: xhat_{j+1} = model(xhat_j, t_j, mu).

    Counterpart of the implicit one-step targets produced in flow-map
    training mode; the model replaces the inner solve entirely.
    """
    import time as _time

    times = grid.times()
    x = basis.project(system.initial_state(mu))
    states = np.empty((x.size, times.size))
    states[:, 0] = x
    tic = _time.perf_counter()
    for j in range(grid.num_steps):
        z = np.concatenate([x, [times[j]], np.asarray(mu, float)])
        x = model.predict(z)
        states[:, j + 1] = x
    wall = _time.perf_counter() - tic
    return TrajectoryResult(times, states, wall, "flow_map")


def reference_flow_map_step(rom, xhat, t, dt, mu):
    """One exact implicit step of the projected model, for comparison."""
    y, _ = backward_euler_step(rom.velocity, rom.jacobian, xhat, t + dt, dt, mu)
    return y
