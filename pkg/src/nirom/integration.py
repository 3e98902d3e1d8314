"""Time integrators and the timestep-verification study.

Classical explicit RK4 and implicit backward Euler (Newton or fixed-point
inner solves) applied to any velocity field, full-order or reduced. Wall
times cover the time loop only, so that online-cost comparisons exclude
setup. ``verify_timestep`` runs a self-convergence study over a ladder of
step counts and picks the coarsest step that already shows the scheme's
nominal order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import time
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    CapabilityError,
    ConvergenceError,
    DivergenceError,
    EvaluationError,
    TimeGrid,
)

DEFAULT_STEP_COUNTS = (25, 50, 100, 200, 400, 800, 1600, 3200, 6400)
NOMINAL_ORDER = {"rk4": 4.0, "backward_euler": 1.0}


@dataclass(frozen=True)
class IntegratorSpec:
    """Scheme selection plus inner-solver settings for the implicit branch.

    ``rk4`` carries no inner solver; ``backward_euler`` carries exactly one
    of ``newton`` or ``fixed_point``.
    """

    scheme: str = "rk4"
    inner: Optional[str] = None
    tol: float = 1e-10
    max_inner: int = 50

    def __post_init__(self):
        if self.scheme not in ("rk4", "backward_euler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "rk4" and self.inner is not None:
            raise ValueError("rk4 takes no inner solver")
        if self.scheme == "backward_euler":
            if self.inner not in ("newton", "fixed_point"):
                raise ValueError("backward_euler needs inner newton or fixed_point")


@dataclass
class TrajectoryResult:
    """States of one integrated trajectory, one column per time point."""

    times: np.ndarray
    states: np.ndarray
    wall_time: float
    scheme: str
    inner: Optional[str] = None
    n_inner_total: int = 0

    @property
    def final_state(self) -> np.ndarray:
        return self.states[:, -1]


def rk4_solve(velocity: Callable, x0, grid: TimeGrid, mu) -> TrajectoryResult:
    """Classical 4th-order Runge-Kutta over the grid.

    Raises DivergenceError (with the step index) as soon as any stage or
    state goes non-finite.
    """
    times = grid.times()
    h = grid.dt
    x = np.array(x0, dtype=float)
    states = np.empty((x.size, times.size))
    states[:, 0] = x
    tic = time.perf_counter()
    for j in range(grid.num_steps):
        t = times[j]
        try:
            k1 = velocity(x, t, mu)
            k2 = velocity(x + 0.5 * h * k1, t + 0.5 * h, mu)
            k3 = velocity(x + 0.5 * h * k2, t + 0.5 * h, mu)
            k4 = velocity(x + h * k3, t + h, mu)
        except EvaluationError as exc:
            raise DivergenceError(f"non-finite stage at step {j}: {exc}", step=j)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state at step {j}", step=j)
        states[:, j + 1] = x
    wall = time.perf_counter() - tic
    return TrajectoryResult(times, states, wall, "rk4")


def backward_euler_step(
    velocity,
    jacobian,
    x_prev,
    t_next: float,
    h: float,
    mu,
    inner: str = "newton",
    tol: float = 1e-10,
    max_inner: int = 50,
):
    """One implicit step; returns (state, inner iterations used)."""
    if inner == "newton":
        if jacobian is None:
            raise CapabilityError("newton inner solve requires a jacobian")
        return _implicit_step_newton(
            velocity, jacobian, np.asarray(x_prev, float), t_next, h, mu, tol, max_inner
        )
    if inner == "fixed_point":
        return _implicit_step_fixed_point(
            velocity, np.asarray(x_prev, float), t_next, h, mu, tol, max_inner
        )
    raise ValueError(f"unknown inner solver {inner!r}")


def _implicit_step_newton(velocity, jacobian, x_prev, t_next, h, mu, tol, max_inner):
    y = x_prev.copy()
    for it in range(1, max_inner + 1):
        r = y - x_prev - h * np.asarray(velocity(y, t_next, mu))
        jac = jacobian(y, t_next, mu)
        if sp.issparse(jac):
            a = (sp.identity(y.size, format="csc") - h * jac).tocsc()
            delta = spla.splu(a).solve(r)
        else:
            delta = np.linalg.solve(np.eye(y.size) - h * np.asarray(jac), r)
        y = y - delta
        if np.linalg.norm(delta) <= tol * (1.0 + np.linalg.norm(y)):
            return y, it
    raise ConvergenceError(
        f"newton stalled, residual {np.linalg.norm(delta):.3e}",
        residual=float(np.linalg.norm(delta)),
    )


def _implicit_step_fixed_point(velocity, x_prev, t_next, h, mu, tol, max_inner):
    y = x_prev.copy()
    for it in range(1, max_inner + 1):
        y_new = x_prev + h * np.asarray(velocity(y, t_next, mu))
        delta = np.linalg.norm(y_new - y)
        y = y_new
        if delta <= tol * (1.0 + np.linalg.norm(y)):
            return y, it
    raise ConvergenceError(f"fixed point stalled, residual {delta:.3e}", residual=float(delta))


def be_solve(
    velocity: Callable,
    jacobian: Optional[Callable],
    x0,
    grid: TimeGrid,
    mu,
    inner: str = "newton",
    tol: float = 1e-10,
    max_inner: int = 50,
) -> TrajectoryResult:
    """Backward Euler: solve y - x_j - h*velocity(y, t_{j+1}, mu) = 0 per step.

    ``inner`` picks the root solver. Newton updates y <- y - (I - h*J)^{-1} r
    and needs ``jacobian``; fixed-point iterates y <- x_j + h*velocity(y).
    Both start at x_j and stop once the update satisfies
    ||dy|| <= tol*(1 + ||y||). Exceeding ``max_inner`` raises
    ConvergenceError with the step index and last residual.
    """
    if inner not in ("newton", "fixed_point"):
        raise ValueError(f"unknown inner solver {inner!r}")
    if inner == "newton" and jacobian is None:
        raise CapabilityError("newton inner solve requires a jacobian")
    times = grid.times()
    h = grid.dt
    x = np.array(x0, dtype=float)
    states = np.empty((x.size, times.size))
    states[:, 0] = x
    n_inner = 0
    tic = time.perf_counter()
    for j in range(grid.num_steps):
        t_next = times[j + 1]
        try:
            if inner == "newton":
                x, its = _implicit_step_newton(
                    velocity, jacobian, x, t_next, h, mu, tol, max_inner
                )
            else:
                x, its = _implicit_step_fixed_point(
                    velocity, x, t_next, h, mu, tol, max_inner
                )
        except ConvergenceError as exc:  # annotate with the step index
            raise ConvergenceError(f"step {j}: {exc}", step=j, residual=exc.residual)
        except EvaluationError as exc:
            raise DivergenceError(f"non-finite state at step {j}: {exc}", step=j)
        n_inner += its
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state at step {j}", step=j)
        states[:, j + 1] = x
    wall = time.perf_counter() - tic
    return TrajectoryResult(times, states, wall, "backward_euler", inner, n_inner)


def integrate(model, grid: TimeGrid, mu, spec: IntegratorSpec) -> TrajectoryResult:
    """Solve a model (anything with velocity/initial_state) per the spec."""
    x0 = model.initial_state(mu)
    if spec.scheme == "rk4":
        return rk4_solve(model.velocity, x0, grid, mu)
    jac = getattr(model, "jacobian", None) if spec.inner == "newton" else None
    return be_solve(
        model.velocity, jac, x0, grid, mu,
        inner=spec.inner, tol=spec.tol, max_inner=spec.max_inner,
    )


@dataclass
class ConvergenceStudy:
    """Self-convergence ladder: errors vs the finest run, pairwise orders.

    ``errors[i]`` is the relative l2 final-time difference between the run
    at ``counts[i]`` and the reference run at ``counts[-1]`` (NaN for the
    reference itself, inf for runs that diverged or failed to converge).
    ``orders[i] = log2(errors[i]/errors[i+1])`` where both are finite and
    positive, NaN otherwise. ``selected_nt`` is the smallest count whose
    order meets 99% of the scheme's nominal order; ``reliable`` is False
    when the finite part of the error ladder is not strictly decreasing.
    """

    scheme: str
    counts: np.ndarray
    dts: np.ndarray
    errors: np.ndarray
    orders: np.ndarray
    nominal_order: float
    selected_nt: Optional[int]
    selected_order: float
    reliable: bool

    def order_at(self, nt: int) -> float:
        idx = int(np.where(self.counts == nt)[0][0])
        return float(self.orders[idx])

    def to_csv(self, path):
        rows = []
        for i, nt in enumerate(self.counts):
            rows.append(
                f"{nt},{self.dts[i]:.12g},{self.errors[i]:.12g},"
                f"{self.orders[i]:.12g},{int(self.counts[i] == self.selected_nt)}"
            )
        text = "Nt,dt,error,observed_order,selected\n" + "\n".join(rows) + "\n"
        with open(path, "w") as fh:
            fh.write(text)


def _relative_l2(x, ref) -> float:
    denom = np.linalg.norm(ref)
    if denom == 0.0:
        return float(np.linalg.norm(x))
    return float(np.linalg.norm(x - ref) / denom)


def verify_timestep(
    model,
    scheme: str,
    mu,
    counts: Sequence[int] = DEFAULT_STEP_COUNTS,
    inner: str = "newton",
    tol: float = 1e-10,
    max_inner: int = 50,
) -> ConvergenceStudy:
    """Run the step ladder and select the coarsest count at nominal order.

    The finest count is the reference; every coarser run is compared to it
    by the relative l2 distance of the final state. Runs that blow up or
    whose implicit solves stall are kept in the ladder with infinite error
    so they can never be selected. Selection requires the local pairwise
    order to reach 99% of the nominal order (4 for rk4, 1 for backward
    Euler).
    """
    counts = np.asarray(sorted(counts), dtype=int)
    if counts.size < 3:
        raise ValueError("need at least three step counts")
    spec = (
        IntegratorSpec("rk4")
        if scheme == "rk4"
        else IntegratorSpec("backward_euler", inner, tol, max_inner)
    )
    t_final = model.t_final
    dts = t_final / counts.astype(float)

    finals = {}
    for nt in counts:
        grid = TimeGrid(0.0, t_final, int(nt))
        try:
            finals[int(nt)] = integrate(model, grid, mu, spec).final_state
        except (DivergenceError, ConvergenceError):
            finals[int(nt)] = None
    ref = finals[int(counts[-1])]
    if ref is None:
        raise ConvergenceError(f"reference run at Nt={counts[-1]} failed")

    errors = np.full(counts.size, np.nan)
    for i, nt in enumerate(counts[:-1]):
        x = finals[int(nt)]
        errors[i] = np.inf if x is None else _relative_l2(x, ref)

    orders = np.full(counts.size, np.nan)
    for i in range(counts.size - 2):
        e0, e1 = errors[i], errors[i + 1]
        if np.isfinite(e0) and np.isfinite(e1) and e0 > 0 and e1 > 0:
            orders[i] = np.log2(e0 / e1)

    nominal = NOMINAL_ORDER[scheme]
    selected_nt = None
    selected_order = float("nan")
    for i in range(counts.size - 2):
        if np.isfinite(orders[i]) and orders[i] >= 0.99 * nominal:
            selected_nt = int(counts[i])
            selected_order = float(orders[i])
            break

    finite = errors[np.isfinite(errors)]
    reliable = bool(finite.size >= 2 and np.all(np.diff(finite) < 0))

    return ConvergenceStudy(
        scheme, counts, dts, errors, orders, nominal, selected_nt, selected_order, reliable
    )
