"""Independent reference values for the limit flow.

The walk's limit is characterized weakly: between (truncated) exponential
vectors the flow matrix element m_t(x) = <v e(g_t]), j_t(x) u e(f_t])>
satisfies the finite-dimensional ODE

    d m_t(x) / dt = m_t( L(x) + <g(t), delta(x)> + delta_dag(x) f(t) )
                    + <g(t), f(t)> m_t(x),

with m_0(x) = <v, x u>.  This module integrates that dual evolution with a
classical 4th-order scheme (breakpoints of f and g forced onto the grid) and
cross-validates it two ways: at f = g = 0 it must reduce to the exact
semigroup, and it must agree with the walk itself evaluated at a far finer
step than the one under study.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import TestFunction
from .model import GkslModel, lindblad_superoperator, semigroup
from .walk import walk_matrix_element

__all__ = [
    "OracleRefinementError",
    "WeakFunctional",
    "fine_walk_reference",
    "flow_matrix_element",
    "flow_matrix_element_fixed",
    "vacuum_check",
    "weak_generator",
]

REFINEMENT_TOL = 1e-8
MAX_STEPS = 2**16


class OracleRefinementError(RuntimeError):
    """Step doubling failed to converge; carries the last residual."""

    def __init__(self, residual: float):
        super().__init__(f"oracle refinement stalled with residual {residual:.3e}")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class WeakFunctional:
    """Linear functional x -> sum conj(W[a,b]) x[a,b] on d x d observables.

    At t = 0 with boundary vectors (u, v) the kernel is W[a,b] = v_a conj(u_b),
    so the value is exactly <v, x u>.
    """

    W: np.ndarray

    @classmethod
    def initial(cls, u, v) -> "WeakFunctional":
        u = np.asarray(u, dtype=complex).reshape(-1)
        v = np.asarray(v, dtype=complex).reshape(-1)
        return cls(W=v[:, None] * np.conj(u)[None, :])

    @property
    def row(self) -> np.ndarray:
        """Row-vector form acting on row-major vec(x)."""
        return np.conj(self.W).reshape(-1)

    def value(self, x) -> complex:
        return complex(self.row @ np.asarray(x, dtype=complex).reshape(-1))


def weak_generator(model: GkslModel, x, gval, fval) -> np.ndarray:
    """L(x) + <g, delta(x)> + delta_dag(x) f for fixed channel vectors g, f.

    Channel-wise, delta_i(x) = [x, R_i] and delta_dag_i(x) = [R_i*, x], so the
    whole thing is L(x) + sum_i conj(g_i)[x, R_i] + sum_i f_i [R_i*, x];
    it kills the identity and reduces to L at g = f = 0.
    """
    x = model.check_x(x)
    gval = np.asarray(gval, dtype=complex).reshape(-1)
    fval = np.asarray(fval, dtype=complex).reshape(-1)
    if len(gval) != model.m or len(fval) != model.m:
        raise ValueError(f"channel vectors must have length m={model.m}")
    from .model import lindblad

    out = lindblad(model, x)
    for i, Ri in enumerate(model.channels):
        out = out + np.conj(gval[i]) * (x @ Ri - Ri @ x)
        out = out + fval[i] * (Ri.conj().T @ x - x @ Ri.conj().T)
    return out


def _weak_superoperator_parts(model: GkslModel):
    """Static pieces of the g/f-dressed generator on row-major vec(x)."""
    d = model.d
    eye = np.eye(d, dtype=complex)
    base = lindblad_superoperator(model)
    drift = []  # multiplies conj(g_i)
    lift = []  # multiplies f_i
    for Ri in model.channels:
        drift.append(np.kron(eye, Ri.T) - np.kron(Ri, eye))
        lift.append(np.kron(Ri.conj().T, eye) - np.kron(eye, Ri.conj()))
    return base, drift, lift


def _integration_grid(f: TestFunction, g: TestFunction, t: float, steps: int) -> np.ndarray:
    """Union of [0, t] endpoints and interior breakpoints, each segment
    subdivided so kinks sit on grid nodes and the total count is >= steps."""
    kinks = np.concatenate([f.breakpoints, g.breakpoints])
    kinks = np.unique(kinks[(kinks > 0) & (kinks < t)])
    edges = np.concatenate([[0.0], kinks, [t]])
    nodes = [np.array([0.0])]
    for a, b in zip(edges[:-1], edges[1:]):
        k = max(1, int(np.ceil((b - a) / t * steps)))
        nodes.append(np.linspace(a, b, k + 1)[1:])
    return np.concatenate(nodes)


def flow_matrix_element_fixed(model: GkslModel, x, u, v, f: TestFunction,
                              g: TestFunction, t: float, steps: int) -> complex:
    """One integrator pass with a fixed step budget (no refinement)."""
    x = model.check_x(x)
    base, drift, lift = _weak_superoperator_parts(model)

    def rate(time: float, row: np.ndarray) -> np.ndarray:
        gv = g(time)
        fv = f(time)
        gen = base.copy()
        for i in range(model.m):
            gen += np.conj(gv[i]) * drift[i] + fv[i] * lift[i]
        return row @ gen + complex(np.vdot(gv, fv)) * row

    row = WeakFunctional.initial(u, v).row
    grid = _integration_grid(f, g, t, steps)
    for a, b in zip(grid[:-1], grid[1:]):
        dt = b - a
        k1 = rate(a, row)
        k2 = rate(a + dt / 2, row + dt / 2 * k1)
        k3 = rate(a + dt / 2, row + dt / 2 * k2)
        k4 = rate(b, row + dt * k3)
        row = row + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return complex(row @ x.reshape(-1))


def flow_matrix_element(model: GkslModel, x, u, v, f: TestFunction, g: TestFunction,
                        t: float, steps: int = 256) -> complex:
    """m_t(x) with automatic step refinement.

    Doubles the step budget until two consecutive passes agree below 1e-8
    (absolute); a stall raises OracleRefinementError with the residual.
    """
    if t < 0:
        raise ValueError("need t >= 0")
    if t == 0:
        return WeakFunctional.initial(u, v).value(model.check_x(x))
    steps = max(64, int(steps))
    prev = flow_matrix_element_fixed(model, x, u, v, f, g, t, steps)
    while steps <= MAX_STEPS:
        steps *= 2
        cur = flow_matrix_element_fixed(model, x, u, v, f, g, t, steps)
        if abs(cur - prev) < REFINEMENT_TOL:
            return cur
        prev = cur
    raise OracleRefinementError(abs(cur - prev))


def vacuum_check(model: GkslModel, x, u, v, t: float, h: float) -> tuple[complex, complex, float]:
    """Walk vs exact semigrooup matrix element on vacuum vectors.

    With f = g = 0 the walk value is the n-fold vacuum-block iteration of x
    and the limit is <v, T_t(x) u>; returns (walk, oracle, |walk - oracle|).
    """
    n = int(round(t / h))
    if abs(n * h - t) > 1e-9 * max(t, 1.0):
        raise ValueError("t must be an integer multiple of h")
    zero = TestFunction.zero(model.m)
    walk_value = walk_matrix_element(model, x, u, v, zero, zero, h, n)
    u_arr = np.asarray(u, dtype=complex).reshape(-1)
    v_arr = np.asarray(v, dtype=complex).reshape(-1)
    oracle_value = complex(np.vdot(v_arr, semigroup(model, x, t) @ u_arr))
    return walk_value, oracle_value, abs(walk_value - oracle_value)


def fine_walk_reference(model: GkslModel, x, u, v, f: TestFunction, g: TestFunction,
                        t: float, h_ref: float, study_h: float | None = None) -> complex:
    """The walk itself at a far finer step, as an alternate oracle.

    Requires t / h_ref to be an integer; when the study step is given,
    h_ref must undercut it by at least a factor of 8.
    """
    n = int(round(t / h_ref))
    if abs(n * h_ref - t) > 1e-9 * max(t, 1.0):
        raise ValueError("t must be an integer multiple of h_ref")
    if study_h is not None and h_ref > study_h / 8:
        raise ValueError("h_ref must be at most an eighth of the study step")
    return walk_matrix_element(model, x, u, v, f, g, h_ref, n)
