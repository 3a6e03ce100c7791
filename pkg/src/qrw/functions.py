"""Piecewise-linear, compactly supported test functions with noise-channel values.

A ``TestFunction`` is the function class every walk quantity is evaluated on:
continuous piecewise-linear between its breakpoints, identically zero outside
them.  The class is closed under restriction to partition intervals, and all
derived quantities the estimates need (sup norm, total slope constant, slot
and cell averages, L2 norms) are exact for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SlotAverages", "TestFunction", "slot_averages"]


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Piecewise-linear function of time with values in C^channels.

    ``breakpoints`` is strictly ascending; ``values[k]`` is the value at
    ``breakpoints[k]`` (one complex entry per channel).  Outside the
    breakpoint range the function is zero.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    channels: int = field(init=False)

    __test__ = False  # keep pytest from collecting the class by name

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if bp.ndim != 1 or len(bp) < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly ascending")
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != len(bp):
            raise ValueError("one value row per breakpoint required")
        if not np.isfinite(vals).all():
            raise ValueError("non-finite values")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "channels", vals.shape[1])

    @classmethod
    def zero(cls, channels: int = 1) -> "TestFunction":
        return cls(np.array([0.0, 1.0]), np.zeros((2, channels)))

    @classmethod
    def constant(cls, value, start: float, end: float) -> "TestFunction":
        value = np.atleast_1d(np.asarray(value, dtype=complex))
        return cls(np.array([start, end]), np.vstack([value, value]))

    @classmethod
    def bump(cls, height: float, start: float, end: float, channels: int = 1,
             channel: int = 0) -> "TestFunction":
        """Single-channel triangle: zero at the endpoints, ``height`` at the middle."""
        mid = 0.5 * (start + end)
        vals = np.zeros((3, channels), dtype=complex)
        vals[1, channel] = height
        return cls(np.array([start, mid, end]), vals)

    # -- evaluation ---------------------------------------------------------
    def __call__(self, t) -> np.ndarray:
        """Evaluate at scalar or array times; shape (..., channels)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (self.channels,), dtype=complex)
        bp, vals = self.breakpoints, self.values
        inside = (t >= bp[0]) & (t <= bp[-1])
        if np.any(inside):
            ti = t[inside]
            idx = np.clip(np.searchsorted(bp, ti, side="right") - 1, 0, len(bp) - 2)
            t0, t1 = bp[idx], bp[idx + 1]
            w = ((ti - t0) / (t1 - t0))[..., None]
            out[inside] = (1 - w) * vals[idx] + w * vals[idx + 1]
        return out

    def _grid_on(self, t0: float, t1: float) -> np.ndarray:
        """Breakpoint-refined node list on [t0, t1] (always contains both ends)."""
        inner = self.breakpoints[(self.breakpoints > t0) & (self.breakpoints < t1)]
        return np.unique(np.concatenate([[t0], inner, [t1]]))

    def integrate(self, t0: float, t1: float) -> np.ndarray:
        """Exact per-channel integral over [t0, t1] (trapezoid on the PL grid)."""
        if t1 < t0:
            raise ValueError("need t1 >= t0")
        nodes = self._grid_on(t0, t1)
        vals = self(nodes)
        return np.sum(
            0.5 * np.diff(nodes)[:, None] * (vals[:-1] + vals[1:]), axis=0
        )

    def cell_averages(self, t0: float, t1: float, cells: int) -> np.ndarray:
        """Exact averages over ``cells`` equal subintervals of [t0, t1]; (cells, channels)."""
        edges = np.linspace(t0, t1, cells + 1)
        width = (t1 - t0) / cells
        return np.stack(
            [self.integrate(edges[c], edges[c + 1]) / width for c in range(cells)]
        )

    def l2_norm_sq(self, t0: float, t1: float) -> float:
        """Exact integral of the squared channel norm (Simpson per PL segment)."""
        nodes = self._grid_on(t0, t1)
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        sq = lambda t: np.sum(np.abs(self(t)) ** 2, axis=-1)  # noqa: E731
        return float(
            np.sum(np.diff(nodes) / 6.0 * (sq(nodes[:-1]) + 4 * sq(mids) + sq(nodes[1:])))
        )

    # -- derived constants ----------------------------------------------------
    def sup_norm(self, t0: float | None = None, t1: float | None = None) -> float:
        """max_s of the channel l2 norm, over [t0, t1] if given.

        The norm of a linear interpolant is convex, so the maximum sits on a
        node of the breakpoint-refined grid.
        """
        if t0 is None:
            nodes = self.breakpoints
        else:
            nodes = self._grid_on(t0, t1)
        return float(np.max(np.linalg.norm(self(nodes), axis=-1), initial=0.0))

    def slope_constant(self, t0: float | None = None, t1: float | None = None) -> float:
        """c_f = sum over channels of the largest |slope|, over [t0, t1] if given."""
        if t0 is None:
            nodes = self.breakpoints
        else:
            nodes = self._grid_on(t0, t1)
        if len(nodes) < 2:
            return 0.0
        vals = self(nodes)
        slopes = np.abs(np.diff(vals, axis=0) / np.diff(nodes)[:, None])
        return float(np.sum(np.max(slopes, axis=0)))

    def pair_overlap_integral(self, other: "TestFunction", t0: float, t1: float) -> complex:
        """integral of <self(s), other(s)> over [t0, t1].

        The integrand is piecewise quadratic; Simpson on the merged breakpoint
        grid is exact.
        """
        nodes = np.unique(np.concatenate([self._grid_on(t0, t1), other._grid_on(t0, t1)]))
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        pair = lambda t: np.sum(np.conj(self(t)) * other(t), axis=-1)  # noqa: E731
        return complex(
            np.sum(np.diff(nodes) / 6.0 * (pair(nodes[:-1]) + 4 * pair(mids) + pair(nodes[1:])))
        )


@dataclass(frozen=True, eq=False)
class SlotAverages:
    """Per-slot scaled averages F[k][i] = h^{-1/2} integral of f_i over slot k."""

    h: float
    n: int
    F: np.ndarray  # (n, channels) complex

    def hatted(self, k: int) -> np.ndarray:
        """The slot-k coefficient vector (1, F[k][0], ..., F[k][m-1])."""
        return np.concatenate([[1.0 + 0j], self.F[k]])


def slot_averages(f: TestFunction, h: float, n: int) -> SlotAverages:
    """Exact slot averages of ``f`` over n consecutive intervals of length h."""
    if h <= 0 or n < 1:
        raise ValueError("need h > 0 and n >= 1")
    F = np.stack([f.integrate(k * h, (k + 1) * h) / np.sqrt(h) for k in range(n)])
    return SlotAverages(h=h, n=n, F=F)
