"""Boson-truncated symmetric Fock space over one partition interval.

The one-particle space is the grid discretization of L2 of one interval of
length h with values in C^m: G equal cells, each carrying the inner-product
weight h/G, so the cell indicators normalized by sqrt(h/G) form an
orthonormal basis of dimension M1 = G*m (mode index alpha = cell*m + channel).

The full space is the direct sum of symmetric powers Sym^n(C^M1) for
n = 0..N.  Sectors are enumerated by multisets of one-particle modes
(``itertools.combinations_with_replacement`` order) and coefficients are
stored over the *orthonormal* occupation basis, so inner products are plain
complex dot products; the multinomial symmetry factors appear in the
construction of product vectors and ladder operators instead.

The distinguished vectors are the vacuum (index 0) and the normalized
constant one-particle vector of each channel ("chi"), which span the
(1+m)-dimensional slot space of the projected walk.  Exponential vectors
e(f) = sum_n f^(x)n / sqrt(n!) are built from per-cell averages of a test
function; the truncation tail is controlled by the Poisson bound
||f||^(2(N+1)) e^(||f||^2) / (N+1)!.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse

from .functions import TestFunction
from .linalg import as_matrix, op_norm

__all__ = [
    "IntervalSpace",
    "IntervalVector",
    "LemmaResult",
    "NormDiffResult",
    "TruncationError",
    "basic_apply",
    "basic_operator_flat",
    "check_N_vs_Lambda",
    "check_lemma_normdiff",
    "exp_tail_bound",
    "exp_vector",
    "fundamental_apply",
    "project_Ph",
    "projection_deficiency",
    "space_for",
]

DEFAULT_CUTOFF = 6
ESCALATED_CUTOFF = 8
TAIL_LIMIT = 1e-8


class TruncationError(ValueError):
    """The boson cutoff is too small for the requested exponential vector."""


# ---------------------------------------------------------------------------
# Cached combinatorial core
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4)
def _sector_basis(n_modes: int, cutoff: int):
    """Per-sector multiset bases.

    Returns (states, sym, offsets, dim): ``states[n]`` is an int array
    (dim_n, n) of sorted mode tuples, ``sym[n]`` the product of occupation
    factorials per state, ``offsets`` the first flat index of each sector.
    """
    states, sym = [], []
    offsets = [0]
    for n in range(cutoff + 1):
        arr = np.fromiter(
            itertools.chain.from_iterable(
                itertools.combinations_with_replacement(range(n_modes), n)
            ),
            dtype=np.int32,
        ).reshape(-1, n) if n else np.zeros((1, 0), dtype=np.int32)
        states.append(arr)
        if n == 0:
            sym.append(np.ones(1))
        else:
            run = np.ones(arr.shape, dtype=np.int64)
            for j in range(1, n):
                same = arr[:, j] == arr[:, j - 1]
                run[:, j] = np.where(same, run[:, j - 1] + 1, 1)
            sym.append(np.prod(run, axis=1).astype(float))
        offsets.append(offsets[-1] + len(arr))
    return states, sym, offsets, offsets[-1]


@lru_cache(maxsize=4)
def _sector_index(n_modes: int, cutoff: int):
    """tuple -> position maps per sector (built only when operators need them)."""
    states = _sector_basis(n_modes, cutoff)[0]
    return [
        {tuple(row): i for i, row in enumerate(arr.tolist())} for arr in states
    ]


@lru_cache(maxsize=4)
def _channel_ops(m: int, G: int, cutoff: int):
    """Sparse chi-creation operators and same-cell hop operators.

    ``create[i]`` is a_dag(chi^i) = G^{-1/2} sum_c a_dag(cell c, channel i)
    as a D x D sparse matrix; ``hop[i][j]`` is the second quantization of the
    one-particle map (cell c, channel j) -> (cell c, channel i), i.e. the
    conservation kernel of the channel matrix unit |e_i><e_j|.
    """
    n_modes = G * m
    states, _, offsets, dim = _sector_basis(n_modes, cutoff)
    index = _sector_index(n_modes, cutoff)
    weight = 1.0 / np.sqrt(G)

    create = []
    for i in range(m):
        rows, cols, vals = [], [], []
        for n in range(cutoff):
            idx_next = index[n + 1]
            off, off_next = offsets[n], offsets[n + 1]
            for s, state in enumerate(map(tuple, states[n])):
                for c in range(G):
                    alpha = c * m + i
                    new = tuple(sorted(state + (alpha,)))
                    mult = new.count(alpha)
                    rows.append(off_next + idx_next[new])
                    cols.append(off + s)
                    vals.append(weight * np.sqrt(mult))
        create.append(
            scipy.sparse.csr_matrix(
                (np.array(vals), (rows, cols)), shape=(dim, dim), dtype=complex
            )
        )

    hop = [[None] * m for _ in range(m)]
    for i in range(m):
        for j in range(m):
            rows, cols, vals = [], [], []
            for n in range(1, cutoff + 1):
                idx_n = index[n]
                off = offsets[n]
                for s, state in enumerate(map(tuple, states[n])):
                    for beta in set(state):
                        if beta % m != j:
                            continue
                        occ = state.count(beta)
                        if i == j:
                            rows.append(off + s)
                            cols.append(off + s)
                            vals.append(float(occ))
                        else:
                            alpha = (beta // m) * m + i
                            lst = list(state)
                            lst.remove(beta)
                            new = tuple(sorted(lst + [alpha]))
                            rows.append(off + idx_n[new])
                            cols.append(off + s)
                            vals.append(np.sqrt(occ) * np.sqrt(new.count(alpha)))
            hop[i][j] = scipy.sparse.csr_matrix(
                (np.array(vals), (rows, cols)), shape=(dim, dim), dtype=complex
            )
    return create, hop


# ---------------------------------------------------------------------------
# Space and vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IntervalSpace:
    """One partition interval of length h: m channels, G cells, boson cutoff N."""

    m: int
    G: int
    N: int
    h: float

    def __post_init__(self):
        if min(self.m, self.G, self.N) < 1 or self.h <= 0:
            raise ValueError("need m, G, N >= 1 and h > 0")

    @property
    def n_modes(self) -> int:
        return self.G * self.m

    @property
    def basis(self):
        return _sector_basis(self.n_modes, self.N)

    @property
    def dim(self) -> int:
        return self.basis[3]

    def sector(self, n: int) -> slice:
        offsets = self.basis[2]
        return slice(offsets[n], offsets[n + 1])

    @property
    def ops(self):
        return _channel_ops(self.m, self.G, self.N)

    def chi_coefficients(self) -> np.ndarray:
        """(m, dim_1) coefficients of the normalized constant channel vectors."""
        out = np.zeros((self.m, self.G * self.m), dtype=complex)
        for i in range(self.m):
            out[i, np.arange(self.G) * self.m + i] = 1.0 / np.sqrt(self.G)
        return out

    def khat_embedding(self) -> np.ndarray:
        """(1+m, dim) rows: vacuum and the chi vectors, as full-space vectors."""
        out = np.zeros((1 + self.m, self.dim), dtype=complex)
        out[0, 0] = 1.0
        out[1:, self.sector(1)] = self.chi_coefficients()
        return out

    def vacuum(self, u=None) -> "IntervalVector":
        data = np.zeros((1, self.dim), dtype=complex)
        data[0, 0] = 1.0
        vec = IntervalVector(self, data)
        return vec if u is None else vec.with_system(u)

    def chi(self, i: int, u=None) -> "IntervalVector":
        data = np.zeros((1, self.dim), dtype=complex)
        data[0, self.sector(1)] = self.chi_coefficients()[i]
        vec = IntervalVector(self, data)
        return vec if u is None else vec.with_system(u)

    def one_particle(self, coeffs, u=None) -> "IntervalVector":
        """Vector with the given one-particle mode coefficients, other sectors zero."""
        data = np.zeros((1, self.dim), dtype=complex)
        data[0, self.sector(1)] = np.asarray(coeffs, dtype=complex)
        vec = IntervalVector(self, data)
        return vec if u is None else vec.with_system(u)


@dataclass(eq=False)
class IntervalVector:
    """Vector in (C^d (x)) the truncated interval Fock space; data is (d, dim)."""

    space: IntervalSpace
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim == 1:
            data = data[None, :]
        if data.shape[1] != self.space.dim:
            raise ValueError("data length does not match space dimension")
        self.data = data

    @property
    def d(self) -> int:
        return self.data.shape[0]

    def with_system(self, u) -> "IntervalVector":
        u = np.asarray(u, dtype=complex).reshape(-1)
        if self.d != 1:
            raise ValueError("vector already carries a system factor")
        return IntervalVector(self.space, u[:, None] * self.data[0])

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def inner(self, other: "IntervalVector") -> complex:
        return complex(np.vdot(self.data, other.data))

    def __add__(self, other):
        return IntervalVector(self.space, self.data + other.data)

    def __sub__(self, other):
        return IntervalVector(self.space, self.data - other.data)

    def __mul__(self, scalar):
        return IntervalVector(self.space, scalar * self.data)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# Exponential vectors
# ---------------------------------------------------------------------------


def _one_particle_coeffs(space: IntervalSpace, cells: np.ndarray) -> np.ndarray:
    cells = np.asarray(cells, dtype=complex)
    if cells.shape != (space.G, space.m):
        raise ValueError(f"cell samples shape {cells.shape}, expected {(space.G, space.m)}")
    return np.sqrt(space.h / space.G) * cells.reshape(-1)


def exp_vector(space: IntervalSpace, cells) -> IntervalVector:
    """Truncated exponential vector of the piecewise-constant grid function.

    ``cells`` holds the per-cell channel values; the n-particle sector gets
    the coherent coefficients prod_alpha c_alpha^{n_alpha} / sqrt(n_alpha!)
    over the occupation basis, which reproduces f^(x)n / sqrt(n!).
    """
    c = _one_particle_coeffs(space, cells)
    states, sym, _, dim = space.basis
    data = np.zeros(dim, dtype=complex)
    data[0] = 1.0
    for n in range(1, space.N + 1):
        if states[n].size == 0:
            continue
        data[space.sector(n)] = np.prod(c[states[n]], axis=1) / np.sqrt(sym[n])
    return IntervalVector(space, data)


def exp_tail_bound(space: IntervalSpace, cells) -> float:
    """Poisson tail bound ||f||^(2(N+1)) e^(||f||^2) / (N+1)! on the cut sectors."""
    nsq = float(np.sum(np.abs(_one_particle_coeffs(space, cells)) ** 2))
    return nsq ** (space.N + 1) * np.exp(nsq) / math.factorial(space.N + 1)


def space_for(f: TestFunction, h: float, m: int, G: int, start: float = 0.0,
              N: int = DEFAULT_CUTOFF) -> IntervalSpace:
    """Build an interval space for f, escalating the cutoff if the tail is large."""
    space = IntervalSpace(m=m, G=G, N=N, h=h)
    cells = f.cell_averages(start, start + h, G)
    if exp_tail_bound(space, cells) > TAIL_LIMIT and N < ESCALATED_CUTOFF:
        space = IntervalSpace(m=m, G=G, N=ESCALATED_CUTOFF, h=h)
    return space


# ---------------------------------------------------------------------------
# Projection onto the slot space
# ---------------------------------------------------------------------------


def project_Ph(space: IntervalSpace, v: IntervalVector) -> IntervalVector:
    """Orthogonal projection onto vacuum + the constant one-particle vectors."""
    chi = space.chi_coefficients()
    out = np.zeros_like(v.data)
    out[:, 0] = v.data[:, 0]
    amps = v.data[:, space.sector(1)] @ chi.conj().T  # (d, m)
    out[:, space.sector(1)] = amps @ chi
    return IntervalVector(space, out)


def projection_deficiency(f: TestFunction, t: float, h: float, m: int, G: int,
                          N: int = DEFAULT_CUTOFF) -> float:
    """||(1 - P_h) e(f restricted to [0, t])|| over the whole partition.

    Exponential vectors factor over intervals, so the norm falls out of
    per-interval norms: ||e||^2 - prod_k ||P_h[k] e(f_[k])||^2 style products.
    """
    n = int(round(t / h))
    if abs(n * h - t) > 1e-9 * max(1.0, t):
        raise ValueError("t must be an integer multiple of h")
    full, proj = 1.0, 1.0
    for k in range(n):
        space = space_for(f, h, m, G, start=k * h, N=N)
        e = exp_vector(space, f.cell_averages(k * h, (k + 1) * h, G))
        full *= e.norm_sq()
        proj *= project_Ph(space, e).norm_sq()
    return float(np.sqrt(max(full - proj, 0.0)))


# ---------------------------------------------------------------------------
# Fundamental and basic operators on one interval
# ---------------------------------------------------------------------------


def _coeff_channels(coeff: np.ndarray, d: int, m: int) -> np.ndarray:
    """Split a (d m) x d map into per-channel d x d blocks (row a*m + i)."""
    return coeff.reshape(d, m, d).transpose(1, 0, 2)


def _check_coeff(l: int, coeff, d: int, m: int) -> np.ndarray:
    coeff = as_matrix(coeff)
    want = {1: (d, d), 2: (d * m, d), 3: (d * m, d), 4: (d * m, d * m)}[l]
    if coeff.shape != want:
        raise ValueError(f"coefficient for kind {l} has shape {coeff.shape}, expected {want}")
    return coeff


def fundamental_apply(space: IntervalSpace, l: int, coeff, v: IntervalVector) -> IntervalVector:
    """Apply one fundamental process of the interval to a system-valued vector.

    Kinds: 1 time (h * S), 2 annihilation a_R, 3 creation a_dag_R,
    4 conservation with kernel T; coefficient shapes d x d, (dm) x d,
    (dm) x d and (dm) x (dm) respectively.
    """
    d, m = v.d, space.m
    coeff = _check_coeff(l, coeff, d, m)
    create, hop = space.ops
    rh = np.sqrt(space.h)
    if l == 1:
        return IntervalVector(space, space.h * (coeff @ v.data))
    if l == 2:
        out = np.zeros_like(v.data)
        for i, Ri in enumerate(_coeff_channels(coeff, d, m)):
            out += Ri.conj().T @ (create[i].conj().T @ v.data.T).T
        return IntervalVector(space, rh * out)
    if l == 3:
        out = np.zeros_like(v.data)
        for i, Ri in enumerate(_coeff_channels(coeff, d, m)):
            out += Ri @ (create[i] @ v.data.T).T
        return IntervalVector(space, rh * out)
    if l == 4:
        out = np.zeros_like(v.data)
        T4 = coeff.reshape(d, m, d, m)
        for i in range(m):
            for j in range(m):
                out += T4[:, i, :, j] @ (hop[i][j] @ v.data.T).T
        return IntervalVector(space, out)
    raise ValueError(f"kind must be 1..4, got {l}")


def basic_apply(space: IntervalSpace, l: int, coeff, v: IntervalVector) -> IntervalVector:
    """Apply one basic operator N^l: the projected/scaled fundamental process.

    On the slot basis (vacuum, chi^1..chi^m) these are exactly the block
    matrix units: N^1_S = S (x) |O><O|, N^2_R = sum_i R_i* (x) |O><chi^i|,
    N^3_R = sum_i R_i (x) |chi^i><O|, N^4_T = sum_ij T_ij (x) |chi^i><chi^j|,
    and they annihilate the orthogonal complement of the slot space.
    """
    d, m = v.d, space.m
    coeff = _check_coeff(l, coeff, d, m)
    chi = space.chi_coefficients()
    sector1 = space.sector(1)
    out = np.zeros_like(v.data)
    if l == 1:
        out[:, 0] = coeff @ v.data[:, 0]
    elif l == 2:
        amps = v.data[:, sector1] @ chi.conj().T  # (d, m)
        for i, Ri in enumerate(_coeff_channels(coeff, d, m)):
            out[:, 0] += Ri.conj().T @ amps[:, i]
    elif l == 3:
        for i, Ri in enumerate(_coeff_channels(coeff, d, m)):
            out[:, sector1] += np.outer(Ri @ v.data[:, 0], chi[i])
    elif l == 4:
        amps = v.data[:, sector1] @ chi.conj().T
        T4 = coeff.reshape(d, m, d, m)
        for i in range(m):
            for j in range(m):
                out[:, sector1] += np.outer(T4[:, i, :, j] @ amps[:, j], chi[i])
    else:
        raise ValueError(f"kind must be 1..4, got {l}")
    return IntervalVector(space, out)


def basic_operator_flat(l: int, coeff, d: int, m: int) -> np.ndarray:
    """The basic operator N^l restricted to system (x) slot space as a flat matrix.

    Uses the global left-factor-major flattening on C^d (x) C^(1+m); this is
    the whole operator, since N^l vanishes on the slot-space complement.
    """
    coeff = _check_coeff(l, coeff, d, m)
    unit = np.zeros((1 + m, 1 + m))
    out = np.zeros((d * (1 + m), d * (1 + m)), dtype=complex)
    if l == 1:
        unit[0, 0] = 1.0
        return np.kron(coeff, unit)
    if l == 2:
        for i, Ri in enumerate(_coeff_channels(coeff, d, m)):
            unit = np.zeros((1 + m, 1 + m))
            unit[0, 1 + i] = 1.0
            out += np.kron(Ri.conj().T, unit)
        return out
    if l == 3:
        for i, Ri in enumerate(_coeff_channels(coeff, d, m)):
            unit = np.zeros((1 + m, 1 + m))
            unit[1 + i, 0] = 1.0
            out += np.kron(Ri, unit)
        return out
    T4 = coeff.reshape(d, m, d, m)
    for i in range(m):
        for j in range(m):
            unit = np.zeros((1 + m, 1 + m))
            unit[1 + i, 1 + j] = 1.0
            out += np.kron(T4[:, i, :, j], unit)
    return out


# ---------------------------------------------------------------------------
# Lemma checks
# ---------------------------------------------------------------------------


class NormDiffResult(NamedTuple):
    lhs: float
    rhs: float
    slack: float
    tail: float
    passed: bool

    def passed_with_safety(self, factor: float = 4.0) -> bool:
        return self.lhs <= factor * self.rhs + self.slack


class LemmaResult(NamedTuple):
    kind: int
    mode: str
    lhs: float
    rhs: float
    slack: float
    passed_raw: bool
    passed: bool


def check_lemma_normdiff(space: IntervalSpace, f: TestFunction, h: float,
                         start: float = 0.0) -> NormDiffResult:
    """Projection loss of one exponential vector against h (c_f + sup) ||e(f)||.

    lhs is computed in the truncated space; the slack adds the truncation
    tail and the grid quadrature allowance h c_f / G.
    """
    if abs(h - space.h) > 1e-12:
        raise ValueError("h must match the space's interval length")
    cells = f.cell_averages(start, start + h, space.G)
    tail = exp_tail_bound(space, cells)
    if tail > TAIL_LIMIT:
        raise TruncationError(f"truncation tail {tail:.2e} needs a larger cutoff than N={space.N}")
    e = exp_vector(space, cells)
    en = e.norm()
    lhs = float(np.sqrt(max(e.norm_sq() - project_Ph(space, e).norm_sq(), 0.0)))
    c_f = f.slope_constant(start, start + h)
    sup = f.sup_norm(start, start + h)
    rhs = h * (c_f + sup) * en
    slack = tail + h * c_f / space.G
    return NormDiffResult(lhs=lhs, rhs=rhs, slack=slack, tail=tail, passed=lhs <= rhs + slack)


def _lemma_rhs(space: IntervalSpace, l: int, mode: str, coeff, u, v, f: TestFunction,
               g: TestFunction | None, start: float, ef_norm: float, eg_norm: float) -> float:
    h = space.h
    sup_f = f.sup_norm(start, start + h)
    c_f = f.slope_constant(start, start + h)
    u_norm = float(np.linalg.norm(u))
    if l == 1:
        base = h**1.5 * float(np.linalg.norm(coeff @ u)) * sup_f * ef_norm
    elif l == 2:
        base = h**1.5 * op_norm(coeff) * u_norm * sup_f**2 * ef_norm
    elif l == 3:
        base = 2 * h * float(np.linalg.norm(coeff @ u)) * sup_f * ef_norm
    else:
        base = 2 * h * op_norm(coeff) * (c_f + sup_f**2) * u_norm * ef_norm
    if mode == "a":
        return base
    sup_g = g.sup_norm(start, start + h)
    v_norm = float(np.linalg.norm(v))
    if l == 1:
        return base * v_norm * eg_norm
    if l == 2:
        return base * sup_g * v_norm * eg_norm
    if l == 3:
        return (
            2 * h**2 * float(np.linalg.norm(coeff @ u)) * v_norm
            * sup_f * sup_g * ef_norm**2 * eg_norm**2
        )
    return (
        h**2 * ((sup_f + c_f) * sup_g) ** 2 * op_norm(coeff)
        * u_norm * v_norm * ef_norm**2 * eg_norm**2
    )


def check_N_vs_Lambda(space: IntervalSpace, l: int, coeff, u, f: TestFunction,
                      g: TestFunction | None = None, v=None, mode: str = "a",
                      start: float = 0.0, safety: float = 4.0) -> LemmaResult:
    """One of the eight basic-vs-fundamental comparison estimates.

    Mode "a" compares ||(h^eps N^l - Lambda^l) u e(f)|| against the stated
    bound; mode "b" compares the magnitude of the matrix element against
    v e(g).  ``passed`` applies the safety factor on the right-hand side,
    ``passed_raw`` does not; both include the truncation/grid slack.
    """
    if mode not in ("a", "b"):
        raise ValueError("mode must be 'a' or 'b'")
    if mode == "b" and (g is None or v is None):
        raise ValueError("mode 'b' needs both v and g")
    u = np.asarray(u, dtype=complex).reshape(-1)
    d = len(u)
    coeff = _check_coeff(l, coeff, d, space.m)
    h = space.h
    cells_f = f.cell_averages(start, start + h, space.G)
    tail = exp_tail_bound(space, cells_f)
    if tail > TAIL_LIMIT:
        raise TruncationError(f"truncation tail {tail:.2e} needs a larger cutoff than N={space.N}")
    ef = exp_vector(space, cells_f)
    ef_norm = ef.norm()
    uef = ef.with_system(u)
    scale = {1: h, 2: np.sqrt(h), 3: np.sqrt(h), 4: 1.0}[l]
    diff = scale * basic_apply(space, l, coeff, uef) - fundamental_apply(space, l, coeff, uef)

    coeff_scale = max(op_norm(coeff), 1.0) * max(float(np.linalg.norm(u)), 1.0)
    c_f = f.slope_constant(start, start + h)
    # 1e-12 absolute floor absorbs pure roundoff in exactly matching cases.
    slack = (tail + h * c_f / space.G + 1e-12) * coeff_scale
    eg_norm = 1.0
    if mode == "a":
        lhs = diff.norm()
    else:
        cells_g = g.cell_averages(start, start + h, space.G)
        tail_g = exp_tail_bound(space, cells_g)
        if tail_g > TAIL_LIMIT:
            raise TruncationError("truncation tail of e(g) too large")
        eg = exp_vector(space, cells_g)
        eg_norm = eg.norm()
        veg = eg.with_system(np.asarray(v, dtype=complex).reshape(-1))
        lhs = abs(veg.inner(diff))
        c_g = g.slope_constant(start, start + h)
        slack = (tail + tail_g + h * (c_f + c_g) / space.G + 1e-12) * coeff_scale * max(
            float(np.linalg.norm(np.asarray(v))), 1.0
        )
    rhs = _lemma_rhs(space, l, mode, coeff, u, v, f, g, start, ef_norm, eg_norm)
    return LemmaResult(
        kind=l,
        mode=mode,
        lhs=float(lhs),
        rhs=float(rhs),
        slack=float(slack),
        passed_raw=bool(lhs <= rhs + slack),
        passed=bool(lhs <= safety * rhs + slack),
    )
