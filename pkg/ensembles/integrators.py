"""Fixed-step integrators shared by the phase ODE, the Madelung equations and the alignment model."""

import math

import numpy as np

from ensembles.exceptions import StepSizeError

# Symmetric composition weights: composing a symmetric second-order map with
# steps w_k * h gives a fourth-order map that stays symmetric. Both sets solve
# sum w = 1, sum w^3 = 0.
_CUBE_ROOT_TWO = 2.0 ** (1.0 / 3.0)
TRIPLE_JUMP_WEIGHTS = (
    1.0 / (2.0 - _CUBE_ROOT_TWO),
    -_CUBE_ROOT_TWO / (2.0 - _CUBE_ROOT_TWO),
    1.0 / (2.0 - _CUBE_ROOT_TWO),
)
# Five stages; the energy error on an oscillator is about ten times smaller
# than the triple jump's at the same step.
_SUZUKI_OUTER = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))
SUZUKI_WEIGHTS = (_SUZUKI_OUTER, _SUZUKI_OUTER, 1.0 - 4.0 * _SUZUKI_OUTER, _SUZUKI_OUTER, _SUZUKI_OUTER)

# Relative agreement of successive fixed-point iterates; a few ulps above round-off.
FIXED_POINT_TOLERANCE = 1e-13


def rk4_step(rhs, t, y, h, k1=None):
    """One classical fourth-order Runge-Kutta step of y' = rhs(t, y).

    k1 may be passed when rhs(t, y) is already known.
    """
    k1 = rhs(t, y) if k1 is None else k1
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def substeps(duration, max_step):
    """Split duration into the fewest equal substeps no longer than max_step."""
    if duration <= 0:
        return 0, 0.0
    count = max(1, math.ceil(duration / max_step - 1e-12))
    return count, duration / count


def rk4_trajectory(rhs, y0, duration, max_step, t0=0.0):
    """Yield (t, y) after each RK4 substep covering [t0, t0 + duration]."""
    count, h = substeps(duration, max_step)
    y = np.asarray(y0, dtype=float)
    for k in range(count):
        y = rk4_step(rhs, t0 + k * h, y, h)
        yield t0 + (k + 1) * h, y


def rk4_integrate(rhs, y0, duration, max_step, t0=0.0):
    y = np.asarray(y0, dtype=float)
    for _, y in rk4_trajectory(rhs, y, duration, max_step, t0):
        pass
    return y


class DenseRk4:
    """RK4 on a grid of fixed steps from the last restart, with cubic Hermite output in between.

    Steps are only taken when a query reaches past the current grid cell, so
    many queries inside one cell cost one RK4 step between them.
    """

    def __init__(self, rhs, step):
        if step <= 0:
            raise StepSizeError("dense output step must be positive")
        self.rhs = rhs
        self.step = step
        self.steps_taken = 0

    def restart(self, t, y):
        self.origin = float(t)
        self.cell = 0
        self.y0 = np.asarray(y, dtype=float)
        self.f0 = self.rhs(self.origin, self.y0)
        self._end = None

    @property
    def t0(self):
        return self.origin + self.cell * self.step

    def _cell_end(self):
        if self._end is None:
            y1 = rk4_step(self.rhs, self.t0, self.y0, self.step, k1=self.f0)
            self._end = (y1, self.rhs(self.t0 + self.step, y1))
            self.steps_taken += 1
        return self._end

    def __call__(self, t):
        """Solution at t, which must not precede the current cell."""
        if t < self.t0:
            raise ValueError(f"dense output cannot go back from t={self.t0:g} to t={t:g}")
        while t > self.origin + (self.cell + 1) * self.step:
            self.y0, self.f0 = self._cell_end()
            self.cell += 1
            self._end = None
        if t == self.t0:
            return self.y0.copy()
        y1, f1 = self._cell_end()
        h = self.step
        s = (t - self.t0) / h
        return (
            (1.0 + 2.0 * s) * (1.0 - s) ** 2 * self.y0
            + s * (1.0 - s) ** 2 * h * self.f0
            + s**2 * (3.0 - 2.0 * s) * y1
            + s**2 * (s - 1.0) * h * f1
        )


def fixed_point(update, guess, tolerance=FIXED_POINT_TOLERANCE, max_iterations=50):
    """Iterate x <- update(x) until successive iterates agree to tolerance, relative to max(1, |x|).

    Raises StepSizeError when max_iterations pass without convergence; the
    usual cause is a step too long for the contraction to hold.
    """
    x = guess
    for _ in range(max_iterations):
        nxt = update(x)
        scale = max(1.0, float(np.max(np.abs(nxt), initial=0.0)))
        if float(np.max(np.abs(nxt - x), initial=0.0)) <= tolerance * scale:
            return nxt
        x = nxt
    raise StepSizeError(f"fixed-point iteration did not converge in {max_iterations} iterations; reduce the step")


def compose(step, state, h, weights=SUZUKI_WEIGHTS):
    """Raise a symmetric second-order step(state, h) to fourth order by symmetric composition."""
    for weight in weights:
        state = step(state, weight * h)
    return state
