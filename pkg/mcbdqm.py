#!/usr/bin/env python3
"""
mcbdqm - modified cubic B-spline differential quadrature solver for the 1D sine-Gordon equation

Solves u_tt = u_xx - sin(u) on [a, b] with Dirichlet data. Space is discretised with
MCB-DQM weighting coefficients (modified cubic B-spline basis, Thomas algorithm), time
with the optimal five-stage fourth-order SSP Runge-Kutta scheme. The CLI reproduces the
benchmark error tables and writes CSV/JSON data for the solution profiles.

- Solve:    mcbdqm solve --example 1 --domain -1 1 --h 0.04 --dt 0.0001 --t-end 1
- Bench:    mcbdqm bench --table 2
- Converge: mcbdqm converge --example 2 --h-list 0.04,0.02,0.01 --dt 0.0001
- Weights:  mcbdqm weights --domain 0 1 --n 11 --w2-method both
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml  # requires PyYAML

# ==================== Configuration ====================
MCBDQM_OUT = os.environ.get("MCBDQM_OUT", os.path.join(os.getcwd(), "mcbdqm-out"))
LOG_LEVEL = os.environ.get("MCBDQM_LOG_LEVEL", "INFO").upper()

_LEVELS = {"DEBUG": 10, "INFO": 20, "WARNING": 30, "ERROR": 40}

W2_METHODS = ("spline", "shu")
DEFAULT_W2_METHOD = "shu"
RMS_MODES = ("conventional", "literal")
BC_STAGINGS = ("stage", "step")
OUTPUT_FORMATS = ("csv", "json")

# Step for time derivatives of boundary data without an analytic formula.
BOUNDARY_FD_STEP = 1e-6


# ==================== Utility Functions ====================
def logger(msg, level="INFO"):
    if _LEVELS.get(level, 20) >= _LEVELS.get(LOG_LEVEL, 20):
        print(f"[{level}] {msg}", file=sys.stderr)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)


class ConfigError(ValueError):
    """Invalid run configuration (config file or command-line flags)."""


class SingularMatrixError(ArithmeticError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"Zero pivot in tridiagonal elimination at row {row}")


class DivergenceError(ArithmeticError):
    """Non-finite values appeared while stepping; carries the step start time and stage."""

    def __init__(self, t: float, stage: Optional[int] = None):
        self.t = t
        self.stage = stage
        where = f" in stage {stage}" if stage is not None else ""
        super().__init__(f"Solution diverged{where} of the step starting at t={t:.6g}")


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


# ==================== Spline basis ====================
class UniformGrid:
    """N uniformly spaced nodes a = x_1 < ... < x_N = b."""

    def __init__(self, a: float, b: float, n: int):
        if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
            raise ValueError(f"Invalid domain [{a}, {b}]")
        if int(n) != n or n < 5:
            raise ValueError(f"The modified basis needs N >= 5 nodes, got {n}")
        self.a = float(a)
        self.b = float(b)
        self.n = int(n)
        self.h = (self.b - self.a) / (self.n - 1)
        nodes = self.a + self.h * np.arange(self.n)
        nodes[-1] = self.b
        nodes.flags.writeable = False
        self.nodes = nodes

    @classmethod
    def from_spacing(cls, a: float, b: float, h: float) -> "UniformGrid":
        if not h > 0:
            raise ValueError(f"Spacing must be positive, got h={h}")
        intervals = (b - a) / h
        whole = int(round(intervals))
        if whole < 1 or abs(intervals - whole) > 1e-9 * max(1.0, intervals):
            raise ValueError(f"h={h} does not divide [{a}, {b}] into whole intervals")
        return cls(a, b, whole + 1)

    def knot(self, j: int) -> float:
        """Centre of the B-spline with index j (x_0 = a - h and x_{N+1} = b + h included)."""
        return self.a + (j - 1) * self.h

    def __repr__(self):
        return f"UniformGrid(a={self.a}, b={self.b}, n={self.n}, h={self.h:.6g})"


# Values of phi_j at (x_{j-1}, x_j, x_{j+1}) per derivative order, before the h^-order factor.
NODAL_COEFFICIENTS = {
    0: (1.0, 4.0, 1.0),
    1: (3.0, 0.0, -3.0),
    2: (6.0, -12.0, 6.0),
}


@dataclass(frozen=True, eq=False)
class NodalValueTable:
    """phi_j(x_i), phi_j'(x_i), phi_j''(x_i) for basis index j = 0..N+1 (rows) and node i = 1..N (columns)."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    def order(self, order: int) -> np.ndarray:
        return (self.value, self.d1, self.d2)[order]


def _check_order(order) -> int:
    if order not in (0, 1, 2):
        raise ValueError(f"Derivative order must be 0, 1 or 2, got {order!r}")
    return int(order)


def _bspline_pieces(r: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Inner (|s| < 1) and outer (1 <= |s| < 2) cubic pieces in the scaled distance r = |x - x_j| / h.

    Derivatives are taken with respect to r; the caller applies sign(s) and 1/h^order.
    """
    if order == 0:
        outer = (2.0 - r) ** 3
        inner = outer - 4.0 * (1.0 - r) ** 3
    elif order == 1:
        outer = -3.0 * (2.0 - r) ** 2
        inner = outer + 12.0 * (1.0 - r) ** 2
    else:
        outer = 6.0 * (2.0 - r)
        inner = outer - 24.0 * (1.0 - r)
    return inner, outer


def eval_bspline(grid: UniformGrid, j: int, x, order: int = 0):
    """Cubic B-spline phi_j (peak value 4, normalisation 1/h^3) or its derivative at x.

    j runs over 0..N+1; indices 0 and N+1 are the phantom splines centred at a - h and b + h.
    Accepts scalars or arrays; returns the same shape.
    """
    order = _check_order(order)
    if not 0 <= j <= grid.n + 1:
        raise ValueError(f"B-spline index must be in 0..{grid.n + 1}, got {j}")
    xa = _as_float_array(x, "x")
    s = (xa - grid.knot(j)) / grid.h
    r = np.abs(s)
    # knots land on integer offsets; snap so nodal values come out exact
    snapped = np.rint(r)
    r = np.where(np.abs(r - snapped) < 1e-12, snapped, r)
    inner, outer = _bspline_pieces(r, order)
    val = np.where(r < 1.0, inner, np.where(r < 2.0, outer, 0.0))
    if order == 1:
        val = np.sign(s) * val
    val = val / grid.h**order
    return float(val) if val.ndim == 0 else val


def _modified_terms(n: int, j: int) -> Tuple[Tuple[int, float], ...]:
    """Modified basis function j as (B-spline index, coefficient) pairs."""
    if not 1 <= j <= n:
        raise ValueError(f"Modified basis index must be in 1..{n}, got {j}")
    if j == 1:
        return ((1, 1.0), (0, 2.0))
    if j == 2:
        return ((2, 1.0), (0, -1.0))
    if j == n - 1:
        return ((n - 1, 1.0), (n + 1, -1.0))
    if j == n:
        return ((n, 1.0), (n + 1, 2.0))
    return ((j, 1.0),)


def eval_modified(grid: UniformGrid, j: int, x, order: int = 0):
    """Modified cubic B-spline: boundary combinations at j = 1, 2, N-1, N, plain phi_j elsewhere."""
    terms = _modified_terms(grid.n, j)
    total = 0.0
    for k, coef in terms:
        total = total + coef * np.asarray(eval_bspline(grid, k, x, order))
    return float(total) if np.ndim(total) == 0 else total


def nodal_table(grid: UniformGrid) -> NodalValueTable:
    n = grid.n
    arrays = []
    for order in (0, 1, 2):
        arr = np.zeros((n + 2, n))
        for j in range(n + 2):
            for offset, coef in zip((-1, 0, 1), NODAL_COEFFICIENTS[order]):
                i = j + offset
                if 1 <= i <= n:
                    arr[j, i - 1] = coef / grid.h**order
        arr.flags.writeable = False
        arrays.append(arr)
    return NodalValueTable(*arrays)


def modified_nodal_values(
    grid: UniformGrid, order: int, table: Optional[NodalValueTable] = None
) -> np.ndarray:
    """N x N array M[p-1, i-1] = (d/dx)^order of modified basis p at node i."""
    order = _check_order(order)
    table = table or nodal_table(grid)
    base = table.order(order)
    out = np.zeros((grid.n, grid.n))
    for p in range(1, grid.n + 1):
        for k, coef in _modified_terms(grid.n, p):
            out[p - 1] += coef * base[k]
    return out


# ==================== DQ weights ====================
@dataclass(frozen=True, eq=False)
class TriDiagMatrix:
    """sub[k] = M[k+1, k], diag[k] = M[k, k], sup[k] = M[k, k+1] (0-based)."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        n = self.diag.size
        if self.sub.size != max(n - 1, 0) or self.sup.size != max(n - 1, 0):
            raise ValueError("Off-diagonals must have length N-1")

    @property
    def n(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def is_diagonally_dominant(self) -> bool:
        off = np.zeros(self.n)
        off[1:] += np.abs(self.sub)
        off[:-1] += np.abs(self.sup)
        return bool(np.all(np.abs(self.diag) >= off))


def thomas_solve(m: TriDiagMatrix, rhs) -> np.ndarray:
    """Solve M x = rhs by forward elimination and back substitution, no pivoting.

    rhs may be a vector of length N or an N x K array of K right-hand sides.
    """
    d = np.array(rhs, dtype=float)
    n = m.n
    if d.shape[0] != n:
        raise ValueError(f"Right-hand side has {d.shape[0]} rows, matrix has {n}")
    sub = np.asarray(m.sub, dtype=float)
    diag = np.asarray(m.diag, dtype=float)
    sup = np.asarray(m.sup, dtype=float)
    c_prime = np.zeros(max(n - 1, 0))

    pivot = diag[0]
    if pivot == 0.0 or not math.isfinite(pivot):
        raise SingularMatrixError(0)
    if n > 1:
        c_prime[0] = sup[0] / pivot
    d[0] = d[0] / pivot
    for i in range(1, n):
        pivot = diag[i] - sub[i - 1] * c_prime[i - 1]
        if pivot == 0.0 or not math.isfinite(pivot):
            raise SingularMatrixError(i)
        if i < n - 1:
            c_prime[i] = sup[i] / pivot
        d[i] = (d[i] - sub[i - 1] * d[i - 1]) / pivot
    for i in range(n - 2, -1, -1):
        d[i] = d[i] - c_prime[i] * d[i + 1]
    return d


def basis_matrix(grid: UniformGrid, table: Optional[NodalValueTable] = None) -> TriDiagMatrix:
    """B[p, j] = phi_p(x_j): rows (6,1), (0,4,1), (1,4,1)..., (1,4,0), (1,6)."""
    values = modified_nodal_values(grid, 0, table)
    return TriDiagMatrix(
        sub=np.diagonal(values, -1).copy(),
        diag=np.diagonal(values).copy(),
        sup=np.diagonal(values, 1).copy(),
    )


def weights_order1(grid: UniformGrid, table: Optional[NodalValueTable] = None) -> np.ndarray:
    """First-derivative weights: row i solves B w_i = (phi_p'(x_i))_p."""
    table = table or nodal_table(grid)
    b = basis_matrix(grid, table)
    rhs = modified_nodal_values(grid, 1, table)
    # column i of the solution holds w_i; all N systems share B and are solved together
    return thomas_solve(b, rhs).T.copy()


def _shu_recurrence(grid: UniformGrid, w1: np.ndarray) -> np.ndarray:
    x = grid.nodes
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    w2 = 2.0 * w1 * (np.diag(w1)[:, None] - 1.0 / dx)
    np.fill_diagonal(w2, 0.0)
    np.fill_diagonal(w2, -w2.sum(axis=1))
    return w2


def normalize_w2_method(method: str) -> str:
    aliases = {
        "spline": "spline",
        "splinesystem": "spline",
        "shu": "shu",
        "shurecurrence": "shu",
    }
    key = str(method).replace("_", "").replace("-", "").lower()
    if key not in aliases:
        raise ValueError(f"Unknown w2 method {method!r} (expected one of {', '.join(W2_METHODS)})")
    return aliases[key]


def weights_order2(
    grid: UniformGrid,
    method: str = DEFAULT_W2_METHOD,
    w1: Optional[np.ndarray] = None,
    table: Optional[NodalValueTable] = None,
) -> np.ndarray:
    """Second-derivative weights.

    spline: solve B w_i = (phi_p''(x_i))_p. The modified basis pins the second derivative
    to zero at both ends, so rows 1 and N come out identically zero.
    shu:    w_ij = 2 w1_ij (w1_ii - 1/(x_i - x_j)) for j != i, diagonal = -(row sum).
    """
    method = normalize_w2_method(method)
    table = table or nodal_table(grid)
    if method == "spline":
        rhs = modified_nodal_values(grid, 2, table)
        return thomas_solve(basis_matrix(grid, table), rhs).T.copy()
    if w1 is None:
        w1 = weights_order1(grid, table)
    return _shu_recurrence(grid, w1)


@dataclass(frozen=True, eq=False)
class WeightMatrices:
    w1: np.ndarray
    w2: np.ndarray
    grid: UniformGrid
    method2: str

    def row_sums(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.w1.sum(axis=1), self.w2.sum(axis=1)


def build_weights(grid: UniformGrid, method: str = DEFAULT_W2_METHOD) -> WeightMatrices:
    method = normalize_w2_method(method)
    table = nodal_table(grid)
    w1 = weights_order1(grid, table)
    w2 = weights_order2(grid, method, w1=w1, table=table)
    w1.flags.writeable = False
    w2.flags.writeable = False
    logger(f"Built DQ weights on {grid} (w2 method: {method})", "DEBUG")
    return WeightMatrices(w1=w1, w2=w2, grid=grid, method2=method)


# ==================== Time integrator ====================
@dataclass(frozen=True, eq=False)
class SspRk54Tableau:
    """Shu-Osher form: y_k = sum_j alpha[k-1, j] y_j + dt * sum_j beta[k-1, j] F(y_j), k = 1..5.

    Row k-1 of alpha/beta holds the weights of y_0..y_{k-1}; y_5 is the new state.
    """

    alpha: np.ndarray
    beta: np.ndarray
    source: str

    @property
    def stages(self) -> int:
        return self.alpha.shape[0]

    def butcher(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Equivalent Butcher tableau (A, b, c)."""
        s = self.stages
        coeffs = np.zeros((s + 1, s))
        for k in range(1, s + 1):
            coeffs[k] = self.alpha[k - 1, :k] @ coeffs[:k]
            coeffs[k, :k] += self.beta[k - 1, :k]
        a = coeffs[:s]
        return a, coeffs[s], a.sum(axis=1)

    def abscissae(self) -> np.ndarray:
        """Time offsets (in units of dt) of y_0..y_5; the last one is 1."""
        s = self.stages
        c = np.zeros(s + 1)
        for k in range(1, s + 1):
            c[k] = self.alpha[k - 1, :k] @ c[:k] + self.beta[k - 1, :k].sum()
        return c


SSPRK54 = SspRk54Tableau(
    alpha=np.array(
        [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [0.444370493651235, 0.555629506348765, 0.0, 0.0, 0.0],
            [0.620101851488403, 0.0, 0.379898148511597, 0.0, 0.0],
            [0.178079954393132, 0.0, 0.0, 0.821920045606868, 0.0],
            [0.0, 0.0, 0.517231671970585, 0.096059710526147, 0.386708617503269],
        ]
    ),
    beta=np.array(
        [
            [0.391752226571890, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.368410593050371, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.251891774271694, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.544974750228521, 0.0],
            [0.0, 0.0, 0.0, 0.063692468666290, 0.226007483236906],
        ]
    ),
    source=(
        "SSPRK(5,4), Spiteri & Ruuth (2002); "
        "Shu-Osher coefficients as tabulated by Gottlieb, Ketcheson & Shu (2009)"
    ),
)


@dataclass
class OdeSystem:
    """y' = rhs(t, y). post_stage runs after every stage update, post_step after every full step."""

    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    post_stage: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    post_step: Optional[Callable[[float, np.ndarray], np.ndarray]] = None


def ssprk54_step(
    sys_: OdeSystem, t: float, y, dt: float, tableau: SspRk54Tableau = SSPRK54
) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"Step size must be positive, got dt={dt}")
    y0 = np.asarray(y, dtype=float)
    if y0.shape != (sys_.dimension,):
        raise ValueError(f"State has shape {y0.shape}, system dimension is {sys_.dimension}")
    c = tableau.abscissae()
    stages = [y0]
    derivs: List[np.ndarray] = []
    for k in range(tableau.stages):
        f = sys_.rhs(t + c[k] * dt, stages[k])
        if f.shape != y0.shape:
            raise ValueError(f"rhs returned shape {f.shape}, expected {y0.shape}")
        derivs.append(f)
        new = np.zeros_like(y0)
        for j in range(k + 1):
            if tableau.alpha[k, j]:
                new += tableau.alpha[k, j] * stages[j]
            if tableau.beta[k, j]:
                new += (dt * tableau.beta[k, j]) * derivs[j]
        t_stage = t + dt if k == tableau.stages - 1 else t + c[k + 1] * dt
        if sys_.post_stage is not None:
            new = sys_.post_stage(t_stage, new)
        if not np.all(np.isfinite(new)):
            raise DivergenceError(t, stage=k + 1)
        stages.append(new)
    result = stages[-1]
    if sys_.post_step is not None:
        result = sys_.post_step(t + dt, result)
        if not np.all(np.isfinite(result)):
            raise DivergenceError(t)
    return result


def integrate(
    sys_: OdeSystem,
    y0,
    t0: float,
    t_end: float,
    dt: float,
    observers: Sequence[float] = (),
    tableau: SspRk54Tableau = SSPRK54,
) -> List[Tuple[float, np.ndarray]]:
    """Fixed-step integration recording the state at each observer time and at t_end.

    The last step before each recorded time is shortened so the record lands on it exactly.
    """
    if t_end < t0:
        raise ValueError(f"t_end={t_end} precedes t0={t0}")
    if not dt > 0:
        raise ValueError(f"Step size must be positive, got dt={dt}")
    skipped = [o for o in observers if not t0 <= o <= t_end]
    if skipped:
        logger(f"Ignoring observer times outside [{t0}, {t_end}]: {skipped}", "WARNING")
    targets = sorted({float(o) for o in observers if t0 <= o <= t_end} | {float(t_end)})

    t = float(t0)
    y = np.array(y0, dtype=float)
    records = []
    steps = 0
    for target in targets:
        seg_start = t
        n_steps = max(int(math.ceil((target - seg_start) / dt - 1e-9)), 0)
        for k in range(n_steps):
            t_now = seg_start + k * dt
            step = dt if k < n_steps - 1 else target - t_now
            y = ssprk54_step(sys_, t_now, y, step, tableau)
        t = target
        steps += n_steps
        records.append((target, y.copy()))
        logger(f"Reached t={target:g} after {steps} steps", "DEBUG")
    return records


# ==================== Sine-Gordon model ====================
Profile = Callable[[np.ndarray], np.ndarray]
Boundary = Callable[[float], float]
Field = Callable[[np.ndarray, float], np.ndarray]


def _sech(z):
    return 1.0 / np.cosh(z)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """u_tt = u_xx - sin(u) on domain, u(x,0) = f1, u_t(x,0) = f2, u(a,t) = g1, u(b,t) = g2."""

    domain: Tuple[float, float]
    f1: Profile
    f2: Profile
    g1: Boundary
    g2: Boundary
    exact: Optional[Field] = None
    exact_t: Optional[Field] = None
    c: float = 0.0
    label: str = ""

    def boundary_velocity(self, t: float) -> Tuple[float, float]:
        a, b = self.domain
        if self.exact_t is not None:
            return float(self.exact_t(np.float64(a), t)), float(self.exact_t(np.float64(b), t))
        k = BOUNDARY_FD_STEP
        return (
            (self.g1(t + k) - self.g1(t - k)) / (2 * k),
            (self.g2(t + k) - self.g2(t - k)) / (2 * k),
        )

    def validate(self, samples: int = 20) -> "ProblemSpec":
        a, b = self.domain
        mismatch_a = abs(self.f1(np.float64(a)) - self.g1(0.0))
        mismatch_b = abs(self.f1(np.float64(b)) - self.g2(0.0))
        if mismatch_a > 1e-10 or mismatch_b > 1e-10:
            raise ValueError(f"{self.label}: initial data does not match boundary data at t=0")
        if self.exact is not None:
            x = np.linspace(a, b, samples)
            k = 1e-6
            if np.max(np.abs(self.exact(x, 0.0) - self.f1(x))) > 1e-8:
                raise ValueError(f"{self.label}: exact(x, 0) differs from f1")
            u_t = (self.exact(x, k) - self.exact(x, -k)) / (2 * k)
            if np.max(np.abs(u_t - self.f2(x))) > 1e-8:
                raise ValueError(f"{self.label}: d/dt exact(x, 0) differs from f2")
        return self


@dataclass
class State:
    t: float
    u: np.ndarray
    v: np.ndarray


EXAMPLE_DEFAULTS: Dict[int, Dict[str, Any]] = {
    0: {"domain": (-1.0, 1.0), "c": 0.0},
    1: {"domain": (-1.0, 1.0), "c": 0.0},
    2: {"domain": (-3.0, 3.0), "c": 0.5},
    3: {"domain": (-10.0, 10.0), "c": 0.5},
}


def _from_exact(domain, exact: Field, exact_t: Field, c: float, label: str) -> ProblemSpec:
    a, b = float(domain[0]), float(domain[1])
    return ProblemSpec(
        domain=(a, b),
        f1=lambda x: exact(x, 0.0),
        f2=lambda x: exact_t(x, 0.0),
        g1=lambda t: float(exact(np.float64(a), t)),
        g2=lambda t: float(exact(np.float64(b), t)),
        exact=exact,
        exact_t=exact_t,
        c=c,
        label=label,
    )


def make_example(
    example_id: int, c: Optional[float] = None, domain: Optional[Tuple[float, float]] = None
) -> ProblemSpec:
    """Benchmark problems; boundary data is the exact solution restricted to x = a, b.

    0: zero problem, u = 0.
    1: u = 4 atan(t sech x).
    2: kink u = 4 atan(exp(gamma (x - c t))), gamma = 1/sqrt(1 - c^2), |c| < 1.
    3: breather u = 4 atan(sin(gb c t) sech(gb x) / c), gb = 1/sqrt(1 + c^2), c != 0.
    """
    if example_id not in EXAMPLE_DEFAULTS:
        raise ValueError(f"Unknown example {example_id!r} (expected 0, 1, 2 or 3)")
    defaults = EXAMPLE_DEFAULTS[example_id]
    domain = tuple(domain) if domain is not None else defaults["domain"]
    c = float(defaults["c"] if c is None else c)

    if example_id == 0:

        def exact(x, t):
            return np.zeros_like(np.asarray(x, dtype=float))

        return _from_exact(domain, exact, exact, c, "zero problem")

    if example_id == 1:

        def exact(x, t):
            return 4.0 * np.arctan(_sech(x) * t)

        def exact_t(x, t):
            s = _sech(x)
            return 4.0 * s / (1.0 + (s * t) ** 2)

        return _from_exact(domain, exact, exact_t, c, "example 1")

    if example_id == 2:
        if not abs(c) < 1.0:
            raise ValueError(f"Kink speed must satisfy |c| < 1, got c={c}")
        gamma = 1.0 / math.sqrt(1.0 - c * c)

        def exact(x, t):
            return 4.0 * np.arctan(np.exp(gamma * (x - c * t)))

        def exact_t(x, t):
            return -2.0 * c * gamma * _sech(gamma * (x - c * t))

        return _from_exact(domain, exact, exact_t, c, f"example 2 (c={c:g})")

    if c == 0.0:
        raise ValueError("Breather parameter c must be non-zero")
    gbar = 1.0 / math.sqrt(1.0 + c * c)

    def exact(x, t):
        return 4.0 * np.arctan(np.sin(gbar * c * t) * _sech(gbar * x) / c)

    def exact_t(x, t):
        s = _sech(gbar * x)
        q = np.sin(gbar * c * t) * s / c
        return 4.0 * gbar * np.cos(gbar * c * t) * s / (1.0 + q * q)

    return _from_exact(domain, exact, exact_t, c, f"example 3 (c={c:g})")


def residual_check(spec: ProblemSpec, samples: int = 50, seed: int = 0) -> float:
    """Max |u_tt - u_xx + sin u| of the exact solution by central differences at random interior points, t in (0, 1]."""
    if spec.exact is None:
        raise ValueError(f"{spec.label} has no exact solution to check")
    rng = np.random.default_rng(seed)
    a, b = spec.domain
    k = 1e-4
    x = rng.uniform(a + k, b - k, samples)
    t = 1.0 - rng.uniform(0.0, 1.0, samples)
    u = spec.exact
    centre = u(x, t)
    u_tt = (u(x, t + k) - 2.0 * centre + u(x, t - k)) / k**2
    u_xx = (u(x + k, t) - 2.0 * centre + u(x - k, t)) / k**2
    return float(np.max(np.abs(u_tt - u_xx + np.sin(centre))))


def sine_gordon_rhs(weights: WeightMatrices, spec: ProblemSpec, t: float, y) -> np.ndarray:
    """Method-of-lines derivative of the packed state (u, v): (v, w2 u - sin u) at interior nodes, 0 at the ends."""
    n = weights.grid.n
    y = np.asarray(y, dtype=float)
    if y.shape != (2 * n,):
        raise ValueError(f"Packed state must have length {2 * n}, got {y.shape}")
    return _packed_derivative(weights.w2[1:-1], y, n)


def _packed_derivative(w2_inner: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    u = y[:n]
    out = np.zeros(2 * n)
    out[1 : n - 1] = y[n + 1 : 2 * n - 1]
    # w2 rows sum to zero; shifting by u[0] makes constant states exact
    out[n + 1 : 2 * n - 1] = w2_inner @ (u - u[0]) - np.sin(u[1:-1])
    return out


class SineGordonSystem:
    """Packs the DQ semi-discretisation and the Dirichlet hook into an OdeSystem."""

    def __init__(self, weights: WeightMatrices, spec: ProblemSpec, bc_staging: str = "stage"):
        if bc_staging not in BC_STAGINGS:
            raise ValueError(f"bc_staging must be one of {BC_STAGINGS}, got {bc_staging!r}")
        self.weights = weights
        self.spec = spec
        self.n = weights.grid.n
        self.bc_staging = bc_staging
        self._w2_inner = np.ascontiguousarray(weights.w2[1:-1])

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return _packed_derivative(self._w2_inner, y, self.n)

    def impose_dirichlet(self, t: float, y: np.ndarray) -> np.ndarray:
        n = self.n
        y[0] = self.spec.g1(t)
        y[n - 1] = self.spec.g2(t)
        y[n], y[2 * n - 1] = self.spec.boundary_velocity(t)
        return y

    def initial_state(self) -> np.ndarray:
        x = self.weights.grid.nodes
        y0 = np.concatenate([self.spec.f1(x), self.spec.f2(x)]).astype(float)
        return self.impose_dirichlet(0.0, y0)

    def ode_system(self) -> OdeSystem:
        hook = self.impose_dirichlet
        if self.bc_staging == "stage":
            return OdeSystem(2 * self.n, self.rhs, post_stage=hook)
        return OdeSystem(2 * self.n, self.rhs, post_step=hook)


def _check_grid_covers(spec: ProblemSpec, grid: UniformGrid) -> None:
    a, b = spec.domain
    scale = max(1.0, abs(a), abs(b))
    if abs(grid.a - a) > 1e-12 * scale or abs(grid.b - b) > 1e-12 * scale:
        raise ValueError(f"Grid [{grid.a}, {grid.b}] does not cover the problem domain [{a}, {b}]")


def solve(
    spec: ProblemSpec,
    grid: UniformGrid,
    dt: float,
    t_end: float,
    w2_method: str = DEFAULT_W2_METHOD,
    snapshot_times: Sequence[float] = (),
    bc_staging: str = "stage",
    weights: Optional[WeightMatrices] = None,
) -> List[State]:
    """Integrate the problem from t = 0 and return states at the snapshot times and at t_end."""
    _check_grid_covers(spec, grid)
    spec.validate()
    if weights is None:
        weights = build_weights(grid, w2_method)
    elif weights.grid.n != grid.n or abs(weights.grid.h - grid.h) > 1e-12 * grid.h:
        raise ValueError("Weights were built on a different grid")
    system = SineGordonSystem(weights, spec, bc_staging)
    logger(
        f"Solving {spec.label} on {grid} with dt={dt:g} to t={t_end:g} (w2: {weights.method2})",
        "DEBUG",
    )
    records = integrate(
        system.ode_system(), system.initial_state(), 0.0, t_end, dt, observers=snapshot_times
    )
    n = grid.n
    return [State(t=t, u=y[:n].copy(), v=y[n:].copy()) for t, y in records]


# ==================== Metrics ====================
@dataclass
class ErrorReport:
    l2: float
    linf: float
    rms: float
    t: float
    n: int
    h: float
    rms_mode: str = "conventional"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def error_norms(
    numerical, exact_fn: Field, grid: UniformGrid, t: float, rms_mode: str = "conventional"
) -> ErrorReport:
    """L2 = sqrt(h sum e^2), Linf = max |e|, RMS = sqrt(sum e^2 / N) (literal mode: sqrt(sum e^2) / N).

    e_j = exact(x_j, t) - numerical_j over the N grid nodes.
    """
    if rms_mode not in RMS_MODES:
        raise ValueError(f"rms_mode must be one of {RMS_MODES}, got {rms_mode!r}")
    u = _as_float_array(numerical, "numerical solution")
    if u.shape != (grid.n,):
        raise ValueError(f"Solution has shape {u.shape}, grid has {grid.n} nodes")
    e = np.asarray(exact_fn(grid.nodes, t), dtype=float) - u
    sq = float(np.sum(e * e))
    rms = math.sqrt(sq / grid.n) if rms_mode == "conventional" else math.sqrt(sq) / grid.n
    return ErrorReport(
        l2=math.sqrt(grid.h * sq),
        linf=float(np.max(np.abs(e))),
        rms=rms,
        t=float(t),
        n=grid.n,
        h=grid.h,
        rms_mode=rms_mode,
    )


@dataclass
class ConvergenceRow:
    h: float
    l2: float
    linf: float
    order_l2: Optional[float] = None
    order_linf: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _order(coarse: float, fine: float, ratio: float) -> Optional[float]:
    if coarse <= 0.0 or fine <= 0.0:
        return None
    return math.log(coarse / fine) / math.log(ratio)


def convergence_orders(
    hs: Sequence[float], l2s: Sequence[float], linfs: Sequence[float]
) -> List[ConvergenceRow]:
    """Observed orders log(E_prev / E) / log(h_prev / h); log2 of the error ratio when h halves."""
    if not len(hs) == len(l2s) == len(linfs):
        raise ValueError("hs, l2s and linfs must have the same length")
    rows = []
    for k, (h, l2, linf) in enumerate(zip(hs, l2s, linfs)):
        row = ConvergenceRow(h=float(h), l2=float(l2), linf=float(linf))
        if k > 0:
            ratio = hs[k - 1] / h
            row.order_l2 = _order(l2s[k - 1], l2, ratio)
            row.order_linf = _order(linfs[k - 1], linf, ratio)
        rows.append(row)
    return rows


def _check_h_list(h_list: Sequence[float]) -> List[float]:
    hs = [float(h) for h in h_list]
    if len(hs) < 2:
        raise ValueError("A convergence study needs at least two spacings")
    if any(not h > 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError(f"Spacings must be positive and strictly descending, got {hs}")
    return hs


def convergence_study(
    spec: ProblemSpec,
    h_list: Sequence[float],
    dt: float = 1e-4,
    t_end: float = 1.0,
    w2_method: str = DEFAULT_W2_METHOD,
    rms_mode: str = "conventional",
    bc_staging: str = "stage",
) -> List[ConvergenceRow]:
    if spec.exact is None:
        raise ValueError(f"{spec.label} has no exact solution; cannot measure convergence")
    hs = _check_h_list(h_list)
    a, b = spec.domain
    l2s, linfs = [], []
    for h in hs:
        grid = UniformGrid.from_spacing(a, b, h)
        final = solve(spec, grid, dt, t_end, w2_method=w2_method, bc_staging=bc_staging)[-1]
        report = error_norms(final.u, spec.exact, grid, final.t, rms_mode)
        logger(f"h={h:g}: L2={report.l2:.4e} Linf={report.linf:.4e}")
        l2s.append(report.l2)
        linfs.append(report.linf)
    return convergence_orders(hs, l2s, linfs)


def manufactured_rows(h_list: Sequence[float], power: float = 2.0) -> List[ConvergenceRow]:
    """Rows for the synthetic error E(h) = h^power; every order equals power."""
    hs = _check_h_list(h_list)
    errors = [h**power for h in hs]
    return convergence_orders(hs, errors, errors)


# ==================== Baselines ====================
@dataclass(frozen=True)
class BaselineRow:
    key: float  # t, or h for the convergence tables
    metric: str  # l2, linf, rms, order_l2, order_linf
    value: float
    source: str = "MCB-DQM"


@dataclass(frozen=True)
class BaselineTable:
    table_id: int
    title: str
    key_name: str
    rows: Tuple[BaselineRow, ...]

    def value(self, key: float, metric: str, source: str = "MCB-DQM") -> Optional[float]:
        for row in self.rows:
            if (
                row.source == source
                and row.metric == metric
                and math.isclose(row.key, key, rel_tol=1e-9)
            ):
                return row.value
        return None

    def keys(self, source: str = "MCB-DQM") -> List[float]:
        return sorted({row.key for row in self.rows if row.source == source})

    def sources(self) -> List[str]:
        seen: List[str] = []
        for row in self.rows:
            if row.source not in seen:
                seen.append(row.source)
        return seen


def _columns(source: str, keys: Sequence[float], **metrics: Sequence[Optional[float]]) -> List[BaselineRow]:
    rows = []
    for metric, values in metrics.items():
        for key, value in zip(keys, values):
            if value is not None:
                rows.append(BaselineRow(key=key, metric=metric, value=value, source=source))
    return rows


_T4 = (0.25, 0.5, 0.75, 1.0)
_T5 = (0.2, 0.4, 0.6, 0.8, 1.0)
_H4 = (0.04, 0.02, 0.01, 0.005)

# fmt: off
BASELINES: Dict[int, BaselineTable] = {
    2: BaselineTable(
        2,
        "Example 1 on [-1, 1], h = 0.04, dt = 0.0001",
        "t",
        tuple(
            _columns("MCB-DQM", _T4, l2=(2.43e-6, 5.54e-6, 6.45e-6, 7.84e-6), linf=(5.46e-6, 7.39e-6, 7.40e-6, 8.75e-6))
            + _columns("Mittal & Bhatia", _T4, l2=(1.18e-5, 4.19e-5, 7.78e-5, 1.30e-4), linf=(2.32e-5, 4.11e-5, 1.02e-4, 1.64e-4))
            + _columns("Dehghan & Shokri", _T4, l2=(3.91e-5, 1.30e-4, 2.35e-4, 3.27e-4), linf=(5.89e-6, 2.01e-5, 3.63e-5, 5.07e-5))
        ),
    ),
    3: BaselineTable(
        3,
        "Example 1 on [-2, 2], h = dt = 0.01",
        "t",
        tuple(
            _columns("MCB-DQM", _T5, linf=(1.46e-6, 2.97e-6, 4.32e-6, 5.46e-6, 6.33e-6), rms=(2.54e-8, 5.67e-8, 9.07e-8, 1.25e-7, 1.58e-7))
            + _columns("Li-Min & Zong-Min", _T5, linf=(9.25e-5, 1.62e-4, 3.73e-4, 6.24e-4, 8.49e-4), rms=(1.76e-5, 1.62e-4, 1.65e-4, 2.98e-4, 4.37e-4))
            + _columns("Jiang & Wang", _T5, linf=(2.50e-5, 4.20e-5, 6.54e-5, 4.01e-4, 1.53e-3), rms=(6.55e-7, 1.15e-6, 1.55e-6, 3.92e-6, 1.56e-5))
            + _columns("Mittal & Bhatia", _T5, linf=(2.26e-5, 7.52e-5, 1.55e-4, 2.59e-4, 3.84e-4), rms=(2.69e-7, 1.19e-6, 2.96e-6, 5.72e-6, 9.56e-6))
        ),
    ),
    4: BaselineTable(
        4,
        "Convergence of example 2, dt = 0.01",
        "h",
        tuple(
            _columns(
                "MCB-DQM",
                _H4,
                l2=(3.331197e-5, 8.480206e-6, 2.087315e-6, 4.660351e-7),
                linf=(3.743029e-5, 9.640778e-6, 2.385016e-6, 5.340646e-7),
                order_l2=(None, 1.974, 2.023, 2.163),
                order_linf=(None, 1.957, 2.015, 2.159),
            )
        ),
    ),
    5: BaselineTable(
        5,
        "Example 2 on [-3, 3], c = 0.5, h = 0.04, dt = 0.0001",
        "t",
        tuple(
            _columns("MCB-DQM", _T4, l2=(5.67e-6, 8.39e-6, 1.05e-5, 1.24e-5), linf=(9.61e-6, 1.10e-5, 1.26e-5, 1.44e-5))
            + _columns("Dehghan & Shokri", _T4, l2=(1.76e-5, 4.31e-5, 8.25e-5, 1.27e-4), linf=(4.95e-6, 8.42e-6, 1.65e-5, 2.51e-5))
            + _columns("Mittal & Bhatia", _T4, l2=(3.66e-5, 9.00e-5, 1.60e-4, 2.27e-4), linf=(4.90e-5, 7.55e-5, 1.43e-4, 2.10e-4))
        ),
    ),
    6: BaselineTable(
        6,
        "Convergence of example 2, c = 0.5, dt = 0.0001",
        "h",
        tuple(
            _columns(
                "MCB-DQM",
                _H4,
                l2=(1.235453e-5, 3.208207e-6, 8.168641e-7, 2.05831e-7),
                linf=(1.439969e-5, 3.820306e-6, 9.834778e-7, 2.493047e-7),
                order_l2=(None, 1.945, 1.974, 1.987),
                order_linf=(None, 1.914, 1.958, 1.980),
            )
        ),
    ),
    7: BaselineTable(
        7,
        "Example 3 on [-10, 10], c = 0.5, h = 0.01, dt = 0.001",
        "t",
        tuple(
            _columns("MCB-DQM", (1.0, 10.0, 20.0), l2=(1.866e-9, 5.474e-9, 9.800e-9), linf=(2.318e-9, 5.234e-9, 5.471e-9))
            + _columns("Mittal & Bhatia", (1.0, 10.0, 20.0), l2=(2.564e-5, 8.850e-5, 1.713e-4), linf=(1.818e-5, 5.228e-5, 9.438e-5))
            + _columns("Bratsos", (1.0, 10.0, 20.0), linf=(1.276e-4, 1.912e-4, 2.519e-4))
        ),
    ),
}
# fmt: on


@dataclass(frozen=True)
class BenchSetup:
    """Configuration of a reproduced table. hard_bound applies to Linf at every row."""

    table_id: int
    example: int
    domain: Tuple[float, float]
    h: float
    dt: float
    times: Tuple[float, ...]
    c: Optional[float] = None
    hard_bound: float = 1e-4
    ratio_limit: Optional[float] = 10.0
    metrics: Tuple[str, ...] = ("l2", "linf")


BENCH_TABLES: Dict[int, BenchSetup] = {
    2: BenchSetup(2, example=1, domain=(-1.0, 1.0), h=0.04, dt=1e-4, times=_T4),
    3: BenchSetup(
        3, example=1, domain=(-2.0, 2.0), h=0.01, dt=0.01, times=_T5, metrics=("linf", "rms")
    ),
    5: BenchSetup(5, example=2, domain=(-3.0, 3.0), h=0.04, dt=1e-4, times=_T4, c=0.5),
    # the 1e-9 figures are not expected to reproduce; only the bound is enforced
    7: BenchSetup(
        7,
        example=3,
        domain=(-10.0, 10.0),
        h=0.01,
        dt=1e-3,
        times=(1.0, 10.0, 20.0),
        c=0.5,
        hard_bound=1e-3,
        ratio_limit=None,
    ),
}

CONVERGENCE_TABLES: Dict[int, Dict[str, Any]] = {
    # dt = 0.01 is unstable for any explicit step at h = 0.005; 1e-3 is the largest stable decade
    4: {"example": 2, "c": 0.5, "h_list": list(_H4), "dt": 1e-3, "t_end": 1.0},
    6: {"example": 2, "c": 0.5, "h_list": list(_H4), "dt": 1e-4, "t_end": 1.0},
}


# ==================== Run configuration ====================
@dataclass
class RunConfig:
    """One solver run. domain and c fall back to the example's defaults; out falls back to MCBDQM_OUT."""

    example: int = 1
    domain: Optional[Tuple[float, float]] = None
    h: float = 0.04
    dt: float = 1e-4
    t_end: float = 1.0
    c: Optional[float] = None
    w2_method: str = DEFAULT_W2_METHOD
    rms_mode: str = "conventional"
    snapshot_times: Tuple[float, ...] = ()
    out: Optional[str] = None
    format: str = "csv"
    bc_staging: str = "stage"
    surface: int = 0

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
        values = {k: v for k, v in data.items() if v is not None}
        try:
            if "example" in values:
                values["example"] = int(values["example"])
            for key in ("h", "dt", "t_end", "c"):
                if key in values:
                    values[key] = float(values[key])
            if "domain" in values:
                domain = values["domain"]
                if len(domain) != 2:
                    raise ConfigError(f"domain needs two endpoints, got {domain!r}")
                values["domain"] = (float(domain[0]), float(domain[1]))
            if "snapshot_times" in values:
                values["snapshot_times"] = parse_float_list(values["snapshot_times"])
            if "surface" in values:
                values["surface"] = int(values["surface"])
            for key in ("w2_method", "rms_mode", "format", "bc_staging", "out"):
                if key in values:
                    values[key] = str(values[key])
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Invalid config value: {e}") from e
        return cls(**values)

    def resolved_domain(self) -> Tuple[float, float]:
        if self.domain is not None:
            return self.domain
        if self.example not in EXAMPLE_DEFAULTS:
            raise ConfigError(f"Unknown example {self.example!r} (expected 0, 1, 2 or 3)")
        return EXAMPLE_DEFAULTS[self.example]["domain"]

    def output_dir(self) -> str:
        return self.out or MCBDQM_OUT

    def validate(self, check_h: bool = True) -> "RunConfig":
        if self.example not in EXAMPLE_DEFAULTS:
            raise ConfigError(f"Unknown example {self.example!r} (expected 0, 1, 2 or 3)")
        a, b = self.resolved_domain()
        if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
            raise ConfigError(f"Invalid domain [{a}, {b}]")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ConfigError(f"t_end must be non-negative, got {self.t_end}")
        if check_h:
            try:
                UniformGrid.from_spacing(a, b, self.h)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        try:
            self.w2_method = normalize_w2_method(self.w2_method)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        for name, value, allowed in (
            ("rms_mode", self.rms_mode, RMS_MODES),
            ("format", self.format, OUTPUT_FORMATS),
            ("bc_staging", self.bc_staging, BC_STAGINGS),
        ):
            if value not in allowed:
                raise ConfigError(f"{name} must be one of {', '.join(allowed)}, got {value!r}")
        bad = [t for t in self.snapshot_times if not 0 <= t <= self.t_end]
        if bad:
            raise ConfigError(f"Snapshot times must lie in [0, {self.t_end}], got {bad}")
        if self.surface < 0:
            raise ConfigError(f"surface must be >= 0, got {self.surface}")
        try:
            self.problem()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return self

    def problem(self) -> ProblemSpec:
        return make_example(self.example, c=self.c, domain=self.resolved_domain())

    def grid(self) -> UniformGrid:
        a, b = self.resolved_domain()
        return UniformGrid.from_spacing(a, b, self.h)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["domain"] = list(self.resolved_domain())
        d["snapshot_times"] = list(self.snapshot_times)
        d["out"] = self.output_dir()
        return d


def parse_float_list(value) -> Tuple[float, ...]:
    """'1,10,20' or [1, 10, 20] -> (1.0, 10.0, 20.0)."""
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
    elif isinstance(value, (int, float)):
        parts = [value]
    else:
        parts = list(value)
    return tuple(float(p) for p in parts)


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a YAML or JSON run configuration (JSON documents parse as YAML)."""
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping of RunConfig fields")
    return data


def merge_config(file_values: Optional[Dict[str, Any]], overrides: Dict[str, Any]) -> RunConfig:
    """Defaults < config file < explicit command-line flags."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(merged)


# ==================== Output writers ====================
def fmt_float(x: float) -> str:
    return f"{x:.9e}"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return fmt_float(float(value))
    return str(value)


def write_csv(
    path: str,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
    metadata: Optional[Dict[str, Any]] = None,
) -> str:
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    with open(path, "w", newline="") as f:
        for key in sorted(metadata or {}):
            f.write(f"# {key}: {metadata[key]}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def write_json(path: str, metadata: Dict[str, Any], records: Sequence[Dict[str, Any]]) -> str:
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    with open(path, "w") as f:
        json.dump({"metadata": metadata, "records": list(records)}, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_table(
    path_stem: str,
    fmt: str,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
    metadata: Dict[str, Any],
) -> str:
    """Write rows as <path_stem>.csv or <path_stem>.json."""
    if fmt == "json":
        records = [
            {k: (float(v) if isinstance(v, np.floating) else v) for k, v in zip(header, row)}
            for row in rows
        ]
        return write_json(f"{path_stem}.json", metadata, records)
    return write_csv(f"{path_stem}.csv", header, rows, metadata)


def write_surface_script(path: str, data_file: str, label: str) -> str:
    script = f"""# gnuplot script for {label}
set datafile separator ","
set key off
set xlabel "x"
set ylabel "t"
set zlabel "u"
set dgrid3d 60,60
set hidden3d
set terminal pngcairo size 900,700
set output "surface.png"
splot "{data_file}" every ::1 using 1:2:3 with lines
set output "contour.png"
set view map
unset surface
set contour base
set cntrparam levels 20
splot "{data_file}" every ::1 using 1:2:3 with lines
"""
    with open(path, "w") as f:
        f.write(script)
    return path


def _timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _snapshot_name(t: float) -> str:
    return f"snapshot_t{t:g}"


# ==================== Commands ====================
def cmd_solve(config: RunConfig) -> int:
    config.validate()
    spec = config.problem()
    grid = config.grid()
    out = config.output_dir()
    ensure_dir(out)

    snapshots = sorted({float(t) for t in config.snapshot_times} | {float(config.t_end)})
    surface_times: List[float] = []
    if config.surface:
        surface_times = [float(t) for t in np.linspace(0.0, config.t_end, config.surface + 1)]
    observers = sorted(set(snapshots) | set(surface_times))

    logger(f"Solving {spec.label} on {grid}, dt={config.dt:g}, t_end={config.t_end:g}")
    start = time.perf_counter()
    states = solve(
        spec,
        grid,
        config.dt,
        config.t_end,
        w2_method=config.w2_method,
        snapshot_times=observers,
        bc_staging=config.bc_staging,
    )
    runtime = time.perf_counter() - start
    by_time = {s.t: s for s in states}

    meta = {
        "problem": spec.label,
        "n": grid.n,
        "h": grid.h,
        "w2_method": config.w2_method,
        "rms_mode": config.rms_mode,
        "tableau": SSPRK54.source,
        "bc_staging": config.bc_staging,
    }
    reports = []
    for t in snapshots:
        state = by_time[t]
        exact = spec.exact(grid.nodes, t)
        report = error_norms(state.u, spec.exact, grid, t, config.rms_mode)
        reports.append(report)
        rows = [(x, u, ue, ue - u) for x, u, ue in zip(grid.nodes, state.u, exact)]
        path = write_table(
            os.path.join(out, _snapshot_name(t)),
            config.format,
            ("x", "u_numerical", "u_exact", "error"),
            rows,
            dict(meta, t=t),
        )
        logger(f"t={t:g}: Linf={report.linf:.4e}, wrote {path}")

    if surface_times:
        rows = []
        for t in surface_times:
            exact = spec.exact(grid.nodes, t)
            rows.extend((x, t, u, ue) for x, u, ue in zip(grid.nodes, by_time[t].u, exact))
        write_csv(os.path.join(out, "surface.csv"), ("x", "t", "u_numerical", "u_exact"), rows)
        write_surface_script(os.path.join(out, "surface.gp"), "surface.csv", spec.label)
        logger(f"Wrote surface data for {len(surface_times)} time levels")

    summary_meta = dict(
        meta, config=config.to_dict(), created=_timestamp(), runtime_seconds=runtime
    )
    write_json(os.path.join(out, "summary.json"), summary_meta, [r.to_dict() for r in reports])

    print("t,l2,linf,rms")
    for r in reports:
        print(f"{r.t:g},{fmt_float(r.l2)},{fmt_float(r.linf)},{fmt_float(r.rms)}")
    return 0


@dataclass
class BenchReport:
    table_id: int
    rows: List[Dict[str, Any]]
    passed: bool
    failures: List[str]
    metadata: Dict[str, Any] = field(default_factory=dict)


def _log_ratio(computed: float, published: float) -> float:
    if computed <= 0.0 or published <= 0.0:
        return math.inf
    return abs(math.log(computed / published))


def run_bench(
    table_id: int, w2_method: str = DEFAULT_W2_METHOD, bc_staging: str = "stage"
) -> BenchReport:
    """Run one published table's configuration and compare against the stored baseline."""
    if table_id not in BENCH_TABLES:
        raise ValueError(
            f"No bench configuration for table {table_id} (expected one of {sorted(BENCH_TABLES)})"
        )
    setup = BENCH_TABLES[table_id]
    baseline = BASELINES[table_id]
    spec = make_example(setup.example, c=setup.c, domain=setup.domain)
    grid = UniformGrid.from_spacing(setup.domain[0], setup.domain[1], setup.h)

    start = time.perf_counter()
    states = solve(
        spec,
        grid,
        setup.dt,
        max(setup.times),
        w2_method=w2_method,
        snapshot_times=setup.times,
        bc_staging=bc_staging,
    )
    runtime = time.perf_counter() - start
    by_time = {s.t: s for s in states}

    rows: List[Dict[str, Any]] = []
    failures: List[str] = []
    rms_distance = {mode: 0.0 for mode in RMS_MODES}
    final_t = max(setup.times)
    for t in setup.times:
        u = by_time[float(t)].u
        reports = {mode: error_norms(u, spec.exact, grid, t, mode) for mode in RMS_MODES}
        computed = {"l2": reports["conventional"].l2, "linf": reports["conventional"].linf}
        for mode in RMS_MODES:
            computed[f"rms_{mode}"] = reports[mode].rms

        for metric in setup.metrics:
            published = baseline.value(t, metric)
            names = [f"rms_{mode}" for mode in RMS_MODES] if metric == "rms" else [metric]
            for name in names:
                value = computed[name]
                ratio = value / published if published else None
                rows.append(
                    {
                        "t": float(t),
                        "metric": name,
                        "computed": value,
                        "published": published,
                        "ratio": ratio,
                        "within_10x": ratio is not None and ratio <= 10.0,
                    }
                )
                if metric == "rms" and published:
                    rms_distance[name[4:]] += _log_ratio(value, published)

        linf = computed["linf"]
        if linf > setup.hard_bound:
            failures.append(f"t={t:g}: Linf {linf:.3e} exceeds the bound {setup.hard_bound:.0e}")
        published_linf = baseline.value(t, "linf")
        limit = setup.ratio_limit
        if limit is not None and t == final_t and published_linf and linf > limit * published_linf:
            failures.append(
                f"t={t:g}: Linf {linf:.3e} is over {limit:g}x the published {published_linf:.3e}"
            )

    metadata: Dict[str, Any] = {
        "table": table_id,
        "title": baseline.title,
        "problem": spec.label,
        "n": grid.n,
        "h": grid.h,
        "dt": setup.dt,
        "w2_method": normalize_w2_method(w2_method),
        "rms_mode": "conventional",
        "tableau": SSPRK54.source,
        "bc_staging": bc_staging,
        "hard_bound": setup.hard_bound,
        "ratio_limit": setup.ratio_limit,
        "runtime_seconds": runtime,
        "created": _timestamp(),
        "competitors": {
            src: [asdict(r) for r in baseline.rows if r.source == src]
            for src in baseline.sources()
            if src != "MCB-DQM"
        },
    }
    if "rms" in setup.metrics:
        best = min(RMS_MODES, key=lambda m: rms_distance[m])
        metadata["rms_mode"] = best
        metadata["rms_best_match"] = best
        logger(f"RMS convention closest to the published column: {best}")
    if setup.ratio_limit is None:
        unconfirmed = [r for r in rows if r["published"] and not r["within_10x"]]
        metadata["unconfirmed"] = [f"t={r['t']:g} {r['metric']}" for r in unconfirmed]
        if unconfirmed:
            logger(
                f"Table {table_id}: {len(unconfirmed)} published values "
                "not reproduced within 10x (unconfirmed)",
                "WARNING",
            )
    return BenchReport(
        table_id=table_id, rows=rows, passed=not failures, failures=failures, metadata=metadata
    )


def cmd_bench(
    table_id: int,
    w2_method: str = DEFAULT_W2_METHOD,
    bc_staging: str = "stage",
    out: Optional[str] = None,
    fmt: str = "csv",
) -> int:
    if fmt not in OUTPUT_FORMATS:
        raise ConfigError(f"format must be one of {', '.join(OUTPUT_FORMATS)}, got {fmt!r}")
    if bc_staging not in BC_STAGINGS:
        raise ConfigError(f"bc_staging must be one of {', '.join(BC_STAGINGS)}, got {bc_staging!r}")
    report = run_bench(table_id, w2_method, bc_staging)
    out = out or MCBDQM_OUT
    header = ("t", "metric", "computed", "published", "ratio", "within_10x")
    rows = [tuple(r[k] for k in header) for r in report.rows]
    if fmt == "json":
        path = write_json(
            os.path.join(out, f"bench_table{table_id}.json"), report.metadata, report.rows
        )
    else:
        skipped = ("competitors", "created", "runtime_seconds")
        csv_meta = {k: v for k, v in report.metadata.items() if k not in skipped}
        path = write_csv(os.path.join(out, f"bench_table{table_id}.csv"), header, rows, csv_meta)

    meta = report.metadata
    print(f"Table {table_id}: {meta['title']}")
    print(
        f"w2 method: {meta['w2_method']}  RMS mode: {meta['rms_mode']}  tableau: {meta['tableau']}"
    )
    print(f"{'t':>6}  {'metric':<16}{'computed':>12}{'published':>12}{'ratio':>10}")
    for r in report.rows:
        published = f"{r['published']:.3e}" if r["published"] else "-"
        ratio = f"{r['ratio']:.2f}" if r["ratio"] is not None else "-"
        print(f"{r['t']:>6g}  {r['metric']:<16}{r['computed']:>12.3e}{published:>12}{ratio:>10}")
    for src, values in meta["competitors"].items():
        cells = ", ".join(f"t={v['key']:g} {v['metric']}={v['value']:.2e}" for v in values)
        print(f"  {src}: {cells}")
    for msg in report.failures:
        logger(msg, "ERROR")
    print(f"Verdict: {'PASS' if report.passed else 'FAIL'}")
    logger(f"Wrote {path}")
    return 0 if report.passed else 1


def cmd_converge(
    config: RunConfig,
    h_list: Sequence[float],
    compare_table: Optional[int] = None,
    self_test: bool = False,
) -> int:
    config.validate(check_h=False)
    if self_test:
        rows = manufactured_rows(h_list)
        label = "manufactured E(h) = h^2"
    else:
        spec = config.problem()
        rows = convergence_study(
            spec,
            h_list,
            dt=config.dt,
            t_end=config.t_end,
            w2_method=config.w2_method,
            rms_mode=config.rms_mode,
            bc_staging=config.bc_staging,
        )
        label = spec.label

    header = ["h", "l2", "linf", "order_l2", "order_linf"]
    table = [[r.h, r.l2, r.linf, r.order_l2, r.order_linf] for r in rows]
    if compare_table is not None:
        if compare_table not in CONVERGENCE_TABLES:
            raise ConfigError(f"--compare-table must be one of {sorted(CONVERGENCE_TABLES)}")
        baseline = BASELINES[compare_table]
        header += ["published_l2", "published_linf", "published_order_l2", "published_order_linf"]
        for line, r in zip(table, rows):
            line += [baseline.value(r.h, m) for m in ("l2", "linf", "order_l2", "order_linf")]

    metadata = {
        "problem": label,
        "dt": config.dt,
        "t_end": config.t_end,
        "w2_method": config.w2_method,
        "rms_mode": config.rms_mode,
        "tableau": SSPRK54.source,
        "compare_table": compare_table,
    }
    path = write_table(
        os.path.join(config.output_dir(), "converge"), config.format, header, table, metadata
    )
    print(",".join(header))
    for line in table:
        print(",".join(_cell(v) for v in line))
    logger(f"Wrote {path}")

    if self_test:
        orders = [o for r in rows for o in (r.order_l2, r.order_linf) if o is not None]
        if any(abs(o - 2.0) > 1e-9 for o in orders):
            logger(f"Self-test orders deviate from 2: {orders}", "ERROR")
            return 1
    return 0


def cmd_weights(
    domain: Tuple[float, float] = (0.0, 1.0),
    n: Optional[int] = 11,
    h: Optional[float] = None,
    w2_method: str = "both",
    out: Optional[str] = None,
) -> int:
    a, b = domain
    grid = UniformGrid.from_spacing(a, b, h) if h is not None else UniformGrid(a, b, n)
    methods = list(W2_METHODS) if w2_method == "both" else [normalize_w2_method(w2_method)]
    out = out or MCBDQM_OUT
    header = [f"w_{j}" for j in range(1, grid.n + 1)] + ["row_sum"]
    meta = {"grid": f"[{grid.a:g}, {grid.b:g}]", "n": grid.n, "h": fmt_float(grid.h)}

    w1 = None
    for method in methods:
        weights = build_weights(grid, method)
        if w1 is None:
            w1 = weights.w1
            rows = [list(row) + [row.sum()] for row in w1]
            path = write_csv(os.path.join(out, "w1.csv"), header, rows, dict(meta, matrix="w1"))
            print(f"{path}  max |row sum| = {np.max(np.abs(w1.sum(axis=1))):.3e}")
        rows = [list(row) + [row.sum()] for row in weights.w2]
        path = write_csv(
            os.path.join(out, f"w2_{method}.csv"),
            header,
            rows,
            dict(meta, matrix="w2", method=method),
        )
        print(f"{path}  max |row sum| = {np.max(np.abs(weights.w2.sum(axis=1))):.3e}")
    return 0


# ==================== CLI ====================
_RUN_FLAGS = {
    "example": "example",
    "domain": "domain",
    "h": "h",
    "dt": "dt",
    "t_end": "t_end",
    "c": "c",
    "w2_method": "w2_method",
    "rms_mode": "rms_mode",
    "snapshot": "snapshot_times",
    "out": "out",
    "format": "format",
    "bc_staging": "bc_staging",
    "surface": "surface",
}

_BENCH_KEYS = ("w2_method", "bc_staging", "out", "format")


def _add_run_options(p: argparse.ArgumentParser, with_h: bool = True) -> None:
    p.add_argument(
        "--example",
        type=int,
        choices=sorted(EXAMPLE_DEFAULTS),
        help="Problem: 0 zero, 1 atan, 2 kink, 3 breather (default 1)",
    )
    p.add_argument(
        "--domain",
        type=float,
        nargs=2,
        metavar=("A", "B"),
        help="Spatial interval (default: the example's)",
    )
    if with_h:
        p.add_argument("--h", type=float, help="Grid spacing (default 0.04)")
    p.add_argument("--dt", type=float, help="Time step (default 0.0001)")
    p.add_argument("--t-end", dest="t_end", type=float, help="Final time (default 1)")
    p.add_argument(
        "--c", type=float, help="Kink speed / breather parameter (default 0.5 for examples 2 and 3)"
    )
    p.add_argument(
        "--w2-method",
        dest="w2_method",
        choices=W2_METHODS,
        help=f"Second-derivative weights (default {DEFAULT_W2_METHOD})",
    )
    p.add_argument(
        "--rms-mode",
        dest="rms_mode",
        choices=RMS_MODES,
        help="RMS convention (default conventional)",
    )
    p.add_argument(
        "--rms-literal",
        dest="rms_mode",
        action="store_const",
        const="literal",
        help="Same as --rms-mode literal",
    )
    p.add_argument("--out", help="Output directory (env: MCBDQM_OUT)")
    p.add_argument("--format", choices=OUTPUT_FORMATS, help="Output format (default csv)")
    p.add_argument(
        "--bc-staging",
        dest="bc_staging",
        choices=BC_STAGINGS,
        help="Re-impose boundary data per stage or per step",
    )


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {field_name: getattr(args, flag, None) for flag, field_name in _RUN_FLAGS.items()}


def main(argv: Optional[Sequence[str]] = None) -> int:
    global LOG_LEVEL
    parser = argparse.ArgumentParser(
        description="mcbdqm - MCB-DQM + SSP-RK54 solver for the sine-Gordon equation"
    )
    parser.add_argument(
        "-c", "--config", metavar="FILE", help="YAML or JSON run configuration; flags override it"
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # solve
    solve_p = subparsers.add_parser("solve", help="Integrate one problem and write snapshots")
    _add_run_options(solve_p)
    solve_p.add_argument(
        "--snapshot", type=parse_float_list, metavar="T1,T2,...", help="Extra output times"
    )
    solve_p.add_argument(
        "--surface", type=int, metavar="K", help="Also write K+1 time levels for surface plots"
    )

    # bench
    bench_p = subparsers.add_parser("bench", help="Reproduce a published error table")
    bench_p.add_argument("--table", type=int, required=True, choices=sorted(BENCH_TABLES))
    bench_p.add_argument("--w2-method", dest="w2_method", choices=W2_METHODS)
    bench_p.add_argument("--bc-staging", dest="bc_staging", choices=BC_STAGINGS)
    bench_p.add_argument("--out", help="Output directory (env: MCBDQM_OUT)")
    bench_p.add_argument("--format", choices=OUTPUT_FORMATS)

    # converge
    conv_p = subparsers.add_parser("converge", help="Grid convergence study")
    _add_run_options(conv_p, with_h=False)
    conv_p.add_argument(
        "--h-list",
        dest="h_list",
        type=parse_float_list,
        metavar="H1,H2,...",
        help="Descending spacings",
    )
    conv_p.add_argument(
        "--compare-table", dest="compare_table", type=int, choices=sorted(CONVERGENCE_TABLES)
    )
    conv_p.add_argument(
        "--self-test",
        dest="self_test",
        action="store_true",
        help="Check the order computation on E(h) = h^2",
    )

    # weights
    weights_p = subparsers.add_parser("weights", help="Dump the DQ weighting matrices")
    weights_p.add_argument("--domain", type=float, nargs=2, metavar=("A", "B"), default=(0.0, 1.0))
    weights_p.add_argument("--n", type=int, default=11, help="Number of nodes (default 11)")
    weights_p.add_argument("--h", type=float, help="Spacing; overrides --n")
    weights_p.add_argument(
        "--w2-method", dest="w2_method", choices=W2_METHODS + ("both",), default="both"
    )
    weights_p.add_argument("--out", help="Output directory (env: MCBDQM_OUT)")

    args = parser.parse_args(argv)
    if args.quiet:
        LOG_LEVEL = "WARNING"

    try:
        file_values = load_config_file(args.config) if args.config else {}
        if args.command == "solve":
            return cmd_solve(merge_config(file_values, _overrides(args)))
        elif args.command == "bench":
            config = merge_config(
                {k: file_values[k] for k in _BENCH_KEYS if k in file_values},
                {k: getattr(args, k) for k in _BENCH_KEYS},
            )
            config.validate(check_h=False)
            return cmd_bench(
                args.table, config.w2_method, config.bc_staging, config.out, config.format
            )
        elif args.command == "converge":
            values = dict(file_values)
            table = CONVERGENCE_TABLES.get(args.compare_table) if args.compare_table else None
            if table:
                for key in ("example", "c", "dt", "t_end"):
                    values.setdefault(key, table[key])
            h_list = args.h_list or (table["h_list"] if table else list(_H4))
            return cmd_converge(
                merge_config(values, _overrides(args)), h_list, args.compare_table, args.self_test
            )
        elif args.command == "weights":
            return cmd_weights(tuple(args.domain), args.n, args.h, args.w2_method, args.out)
    except ConfigError as e:
        logger(str(e), "ERROR")
        return 2
    except DivergenceError as e:
        logger(f"{e}; try a smaller dt", "ERROR")
        return 3
    except ArithmeticError as e:
        logger(str(e), "ERROR")
        return 3
    except ValueError as e:
        logger(str(e), "ERROR")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
