"""
One-dimensional MCP(K,N) densities on [0, D].

A density is stored through ln h and T = (ln h)' on a node grid. Vanishing
endpoints carry log_h = -inf and an infinite log-derivative. Every admissible
log-derivative can be written as

    T = theta * cot_{K,N,D}(x) - (1 - theta) * cot_{K,N,D}(D - x),  0 <= theta <= 1,

which is how random, model and mollified densities are generated here.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import BPoly

from pgap_geometry import (
    DIAMETER_SLACK,
    Params,
    Tolerances,
    cot_knd,
    diameter_bound,
    log_model_h,
    log_model_h1,
    log_model_h2,
    log_s_kappa,
    model_T,
)
from pgap_utils import spawn_rng

logger = logging.getLogger('pgap.density')

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True, eq=False)
class MCPDensity:
    K: float
    N: float
    D: float
    grid: np.ndarray = field(repr=False)
    log_h: np.ndarray = field(repr=False)
    log_deriv: np.ndarray = field(repr=False)
    log_deriv_fn: Callable = field(default=None, repr=False)
    log_h_fn: Callable = field(default=None, repr=False)
    breaks: tuple = ()
    label: str = ''

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        log_h = np.array(self.log_h, dtype=float)
        log_deriv = np.array(self.log_deriv, dtype=float)
        if grid.ndim != 1 or grid.size < 4:
            raise ValueError("Density grid needs at least four nodes")
        if log_h.shape != grid.shape or log_deriv.shape != grid.shape:
            raise ValueError("log_h and log_deriv must match the grid length")
        if not self.N > 1 or not self.D > 0:
            raise ValueError(f"Density needs N > 1 and D > 0 (got N={self.N}, D={self.D})")
        if grid[0] != 0.0 or abs(grid[-1] - self.D) > 1e-9 * self.D:
            raise ValueError(f"Density grid must run from 0 to D={self.D}")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("Density grid must be strictly increasing")
        if self.K > 0 and self.D > diameter_bound(self.K, self.N) * (1.0 + DIAMETER_SLACK):
            raise ValueError(f"K > 0 needs D <= D_KN (got D={self.D})")
        if np.any(np.isnan(log_h)) or np.any(log_h == np.inf):
            raise ValueError("log_h must be finite or -inf")
        if not np.all(np.isfinite(log_h[1:-1])):
            raise ValueError("Density vanishes inside (0, D); support with holes is not allowed")
        if np.any(np.isnan(log_deriv)) or not np.all(np.isfinite(log_deriv[1:-1])):
            raise ValueError("log_deriv must be finite at interior nodes")
        grid[-1] = float(self.D)
        for arr in (grid, log_h, log_deriv):
            arr.setflags(write=False)
        object.__setattr__(self, 'grid', grid)
        object.__setattr__(self, 'log_h', log_h)
        object.__setattr__(self, 'log_deriv', log_deriv)
        object.__setattr__(self, 'K', float(self.K))
        object.__setattr__(self, 'N', float(self.N))
        object.__setattr__(self, 'D', float(self.D))
        object.__setattr__(self, 'breaks', tuple(float(b) for b in self.breaks))

    @classmethod
    def from_functions(cls, K, N, D, log_h_fn, log_deriv_fn, grid=4096, breaks=(), label=''):
        """Sample closed-form ln h and (ln h)' on a uniform grid and keep them for exact evaluation."""
        nodes = _make_grid(D, grid)
        return cls(K, N, D, nodes, np.asarray(log_h_fn(nodes), dtype=float),
                   np.asarray(log_deriv_fn(nodes), dtype=float),
                   log_deriv_fn=log_deriv_fn, log_h_fn=log_h_fn, breaks=breaks, label=label)

    @property
    def M(self) -> int:
        return self.grid.size - 1

    def params(self, p, tol: Tolerances = None) -> Params:
        return Params(p, self.K, self.N, self.D, tol or Tolerances())

    def log_deriv_at(self, x):
        if self.log_deriv_fn is not None:
            return self.log_deriv_fn(x)
        g, T = self.grid, self.log_deriv
        scalar = np.ndim(x) == 0
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        T_fill = T.copy()
        T_fill[0] = T[1] if not np.isfinite(T[0]) else T[0]
        T_fill[-1] = T[-2] if not np.isfinite(T[-1]) else T[-1]
        out = np.interp(x_arr, g, T_fill)
        with np.errstate(divide='ignore', invalid='ignore'):
            if not np.isfinite(T[0]):
                first = x_arr < g[1]
                out[first] = T[1] * g[1] / x_arr[first]
            if not np.isfinite(T[-1]):
                last = x_arr > g[-2]
                out[last] = T[-2] * (self.D - g[-2]) / (self.D - x_arr[last])
        return float(out[0]) if scalar else out

    def log_h_at(self, x):
        """ln h at x; power-law continuation in end cells where h vanishes."""
        if self.log_h_fn is not None:
            return self.log_h_fn(x)
        g, L, T = self.grid, self.log_h, self.log_deriv
        scalar = np.ndim(x) == 0
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        L_fill = L.copy()
        L_fill[0] = L[1] if not np.isfinite(L[0]) else L[0]
        L_fill[-1] = L[-2] if not np.isfinite(L[-1]) else L[-1]
        out = np.interp(x_arr, g, L_fill)
        with np.errstate(divide='ignore', invalid='ignore'):
            if not np.isfinite(L[0]):
                first = x_arr < g[1]
                out[first] = L[1] + T[1] * g[1] * np.log(x_arr[first] / g[1])
            if not np.isfinite(L[-1]):
                last = x_arr > g[-2]
                width = self.D - g[-2]
                out[last] = L[-2] - T[-2] * width * np.log((self.D - x_arr[last]) / width)
        return float(out[0]) if scalar else out

    def h(self, normalize: bool = False) -> np.ndarray:
        """h at the nodes; `normalize` divides by the total mass."""
        shift = float(np.max(self.log_h))
        values = np.exp(self.log_h - shift)
        if normalize:
            return values / np.trapezoid(values, self.grid)
        return values * math.exp(shift)

    def mass(self) -> float:
        shift = float(np.max(self.log_h))
        return float(np.trapezoid(np.exp(self.log_h - shift), self.grid) * math.exp(shift))

    def shifted(self, constant: float) -> 'MCPDensity':
        """h multiplied by exp(constant)."""
        fn = self.log_h_fn
        return MCPDensity(self.K, self.N, self.D, self.grid, self.log_h + constant, self.log_deriv,
                          log_deriv_fn=self.log_deriv_fn,
                          log_h_fn=None if fn is None else (lambda x: fn(x) + constant),
                          breaks=self.breaks, label=self.label)


@dataclass
class ValidationReport:
    passed: bool
    ratio_violation: float
    bound_violation: float
    worst_pair: tuple = None
    pairs_checked: int = 0
    tol: float = 1e-10

    @property
    def violation(self) -> float:
        return max(self.ratio_violation, self.bound_violation)

    def to_dict(self) -> dict:
        return {
            'passed': self.passed,
            'violation': self.violation,
            'ratio_violation': self.ratio_violation,
            'bound_violation': self.bound_violation,
            'worst_pair': list(self.worst_pair) if self.worst_pair else None,
            'pairs_checked': self.pairs_checked,
            'tol': self.tol,
        }


def _make_grid(D: float, grid) -> np.ndarray:
    if np.ndim(grid) == 0:
        M = int(grid)
        if M < 4:
            raise ValueError(f"Grid needs at least 4 cells (got {M})")
        nodes = np.linspace(0.0, D, M + 1)
    else:
        nodes = np.array(grid, dtype=float)
        if nodes[0] != 0.0 or abs(nodes[-1] - D) > 1e-9 * D:
            raise ValueError(f"Grid must run from 0 to D={D}")
    nodes[-1] = D
    return nodes


def _check_params(h: MCPDensity, params) -> None:
    if params is None:
        return
    close = lambda a, b: abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))
    if not (close(h.K, params.K) and close(h.N, params.N) and close(h.D, params.D)):
        raise ValueError(
            f"Density (K={h.K}, N={h.N}, D={h.D}) does not match parameters "
            f"(K={params.K}, N={params.N}, D={params.D})"
        )


def mcp_validate(h: MCPDensity, params=None, tol: float = None, pairs: int = None, seed: int = 0) -> ValidationReport:
    """
    Check h against the two-sided MCP(K,N) ratio conditions.

    A(x) = (N-1) ln s(D-x) - ln h(x) must be non-increasing and
    B(x) = (N-1) ln s(x)   - ln h(x) non-decreasing. Both are scanned over
    consecutive interior nodes plus `pairs` random long-range partners per node,
    and the pointwise bounds -cot(D-x) <= T(x) <= cot(x) are checked on log_deriv.
    """
    _check_params(h, params)
    tolerances = params.tol if params is not None else Tolerances()
    tol = tolerances.validation_tol if tol is None else float(tol)
    pairs = tolerances.validation_pairs if pairs is None else int(pairs)

    kappa = h.K / (h.N - 1.0)
    x = h.grid[1:-1]
    L = h.log_h[1:-1]
    A = (h.N - 1.0) * log_s_kappa(h.D - x, kappa) - L
    B = (h.N - 1.0) * log_s_kappa(x, kappa) - L

    rise_A = np.diff(A)
    drop_B = -np.diff(B)
    ratio_violation = max(0.0, float(np.max(rise_A)), float(np.max(drop_B)))
    worst = None
    if ratio_violation > 0:
        i = int(np.argmax(np.maximum(rise_A, drop_B)))
        worst = (float(x[i]), float(x[i + 1]))
    checked = rise_A.size

    if pairs > 0 and x.size > 2:
        rng = np.random.default_rng(seed)
        i = np.repeat(np.arange(x.size), pairs)
        j = rng.integers(0, x.size, size=i.size)
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        far = np.maximum(A[hi] - A[lo], B[lo] - B[hi])
        checked += int(i.size)
        if far.size and float(np.max(far)) > ratio_violation:
            k = int(np.argmax(far))
            ratio_violation = float(far[k])
            worst = (float(x[lo[k]]), float(x[hi[k]]))

    T = h.log_deriv[1:-1]
    upper = cot_knd(x, h.K, h.N)
    lower = -cot_knd(h.D - x, h.K, h.N)
    scale = 1.0 + np.abs(upper) + np.abs(lower)
    excess = np.maximum(T - upper, lower - T) / scale
    bound_violation = max(0.0, float(np.max(excess)))

    passed = ratio_violation <= tol and bound_violation <= tol
    if not passed:
        logger.debug(f"Density '{h.label}' fails MCP check: ratio={ratio_violation:.3e} bound={bound_violation:.3e}")
    return ValidationReport(passed, ratio_violation, bound_violation, worst, checked, tol)


def _theta_log_derivative(theta: Callable, K: float, N: float, D: float) -> Callable:
    def T_at(x):
        scalar = np.ndim(x) == 0
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        th = np.clip(np.atleast_1d(np.asarray(theta(x_arr), dtype=float)), 0.0, 1.0)
        up = cot_knd(x_arr, K, N)
        down = cot_knd(np.clip(D - x_arr, 0.0, None), K, N)
        with np.errstate(invalid='ignore'):
            out = np.where(th > 0, th * up, 0.0) - np.where(th < 1, (1.0 - th) * down, 0.0)
        return float(out[0]) if scalar else out
    return T_at


def density_from_theta(theta: Callable, K: float, N: float, D: float, grid=4096, breaks=(), label: str = 'theta') -> MCPDensity:
    """
    Density with T = theta cot(x) - (1 - theta) cot(D - x) for a [0, 1]-valued theta.

    ln h = (N-1) ln s(D-x) + int theta (cot(x) + cot(D-x)) dx, integrated outward
    from the centre node with 8-point Gauss-Legendre on each cell.
    """
    nodes = _make_grid(D, grid)
    M = nodes.size - 1
    T_at = _theta_log_derivative(theta, K, N, D)
    kappa = K / (N - 1.0)

    lo, hi = nodes[:-1], nodes[1:]
    half = 0.5 * (hi - lo)
    points = (0.5 * (lo + hi))[:, None] + half[:, None] * _GAUSS_NODES[None, :]
    flat = points.ravel()
    th = np.clip(np.asarray(theta(flat), dtype=float), 0.0, 1.0)
    g = cot_knd(flat, K, N) + cot_knd(np.clip(D - flat, 0.0, None), K, N)
    cell = half * ((th * g).reshape(points.shape) @ _GAUSS_WEIGHTS)

    centre = M // 2
    cumulative = np.concatenate([[0.0], np.cumsum(cell)])
    offset = cumulative - cumulative[centre]

    log_h = np.empty(M + 1)
    log_deriv = np.empty(M + 1)
    log_h[1:M] = (N - 1.0) * log_s_kappa(D - nodes[1:M], kappa) + offset[1:M]
    log_deriv[1:M] = T_at(nodes[1:M])

    def cell_integral(i):
        return float(half[i] * (np.asarray(T_at(points[i]), dtype=float) @ _GAUSS_WEIGHTS))

    theta_0 = float(np.clip(theta(np.array([0.0]))[0], 0.0, 1.0))
    down_0 = cot_knd(D, K, N)
    if theta_0 > 0 or not math.isfinite(down_0):
        log_h[0], log_deriv[0] = -np.inf, np.inf
    else:
        log_h[0] = log_h[1] - cell_integral(0)
        log_deriv[0] = 2.0 * log_deriv[1] - log_deriv[2]

    theta_D = float(np.clip(theta(np.array([D]))[0], 0.0, 1.0))
    up_D = cot_knd(D, K, N)
    if theta_D < 1 or not math.isfinite(up_D):
        log_h[M], log_deriv[M] = -np.inf, -np.inf
    else:
        log_h[M] = log_h[M - 1] + cell_integral(M - 1)
        log_deriv[M] = 2.0 * log_deriv[M - 1] - log_deriv[M - 2]

    return MCPDensity(K, N, D, nodes, log_h, log_deriv, log_deriv_fn=T_at, breaks=breaks, label=label)


def random_density(params, seed, degree: int = 8, grid: int = 4096) -> MCPDensity:
    """Random member of F_{K,N,D}: theta is a Bernstein polynomial with U[0,1] coefficients."""
    rng = seed if isinstance(seed, np.random.Generator) else spawn_rng(seed, 0)
    if degree < 0:
        raise ValueError(f"Bernstein degree must be >= 0 (got {degree})")
    coefficients = rng.uniform(0.0, 1.0, size=int(degree) + 1)
    theta = BPoly(coefficients[:, None], [0.0, params.D])
    label = f"random(seed={seed if not isinstance(seed, np.random.Generator) else 'rng'}, degree={degree})"
    return density_from_theta(theta, params.K, params.N, params.D, grid=grid, label=label)


def model_density(params: Params, kind: str = 'h', grid: int = 4096) -> MCPDensity:
    """Closed-form h_{K,N,D} ('h'), h^1 ('h1') or h^2 ('h2')."""
    K, N, D = params.K, params.N, params.D
    if kind == 'h':
        log_fn = lambda x: log_model_h(np.clip(x, 0.0, D), params)
        T_fn = lambda x: model_T(np.clip(x, 0.0, D), params)
        breaks = (0.5 * D,)
    elif kind == 'h1':
        log_fn = lambda x: log_model_h1(np.clip(x, 0.0, D), params)
        T_fn = lambda x: cot_knd(np.clip(x, 0.0, D), K, N)
        breaks = ()
    elif kind == 'h2':
        log_fn = lambda x: log_model_h2(np.clip(x, 0.0, D), params)
        T_fn = lambda x: -cot_knd(np.clip(D - np.asarray(x, dtype=float), 0.0, None), K, N)
        breaks = ()
    else:
        raise ValueError(f"Unknown model density kind {kind!r}; use one of h, h1, h2")
    return MCPDensity.from_functions(K, N, D, log_fn, T_fn, grid=grid, breaks=breaks, label=f"model_{kind}")


def rescale_density(h: MCPDensity, D_new: float) -> MCPDensity:
    """h(x D / D_new) on [0, D_new]; the curvature bound becomes K (D / D_new)^2."""
    if not D_new > 0:
        raise ValueError(f"Rescaled diameter must be positive (got {D_new})")
    c = D_new / h.D
    T_fn, L_fn = h.log_deriv_fn, h.log_h_fn
    return MCPDensity(
        h.K / (c * c), h.N, D_new,
        h.grid * c, h.log_h, h.log_deriv / c,
        log_deriv_fn=None if T_fn is None else (lambda x: T_fn(np.asarray(x, dtype=float) / c) / c
                                               if np.ndim(x) else T_fn(float(x) / c) / c),
        log_h_fn=None if L_fn is None else (lambda x: L_fn(np.asarray(x, dtype=float) / c)
                                           if np.ndim(x) else L_fn(float(x) / c)),
        breaks=tuple(b * c for b in h.breaks),
        label=h.label,
    )


def _bump(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def theta_of(h: MCPDensity) -> np.ndarray:
    """Node values of theta with T = theta cot(x) - (1 - theta) cot(D - x)."""
    x = h.grid
    up = cot_knd(x[1:-1], h.K, h.N)
    down = cot_knd(h.D - x[1:-1], h.K, h.N)
    theta = np.empty_like(x)
    theta[1:-1] = np.clip((h.log_deriv[1:-1] + down) / (up + down), 0.0, 1.0)

    # A finite log-derivative at an end pins theta to 0 (at x=0) or 1 (at x=D)
    if np.isfinite(h.log_deriv[0]):
        theta[0] = 0.0
    else:
        theta[0] = float(np.clip(2.0 * theta[1] - theta[2], 0.0, 1.0)) or theta[1]
    if np.isfinite(h.log_deriv[-1]):
        theta[-1] = 1.0
    else:
        end = float(np.clip(2.0 * theta[-2] - theta[-3], 0.0, 1.0))
        theta[-1] = end if end < 1.0 else theta[-2]
    return theta


def smooth_density(h: MCPDensity, width: float) -> MCPDensity:
    """
    Mollify theta with a bump kernel whose support shrinks near the endpoints
    (min(width, x, D - x)), then rebuild. The result lies in F_{K,N,D} again.
    """
    if not width > 0:
        raise ValueError(f"Mollifier width must be positive (got {width})")
    if width >= 0.25 * h.D:
        raise ValueError(f"Mollifier width {width} too large for D={h.D}; need width < D/4")
    if h.K > 0 and h.D >= diameter_bound(h.K, h.N) * (1.0 - DIAMETER_SLACK):
        logger.info("D equals the diameter bound; F_{K,N,D} is a single density, nothing to smooth")
        return h

    x = h.grid
    theta = theta_of(h)
    smoothed = theta.copy()
    changed = False
    for i in range(1, x.size - 1):
        w = min(width, x[i], h.D - x[i])
        lo = np.searchsorted(x, x[i] - w, side='right')
        hi = np.searchsorted(x, x[i] + w, side='left')
        if hi - lo <= 1:
            continue
        weights = _bump((x[lo:hi] - x[i]) / w)
        smoothed[i] = float(weights @ theta[lo:hi] / weights.sum())
        changed = True
    if not changed:
        return h

    frozen = smoothed.copy()
    rebuilt = density_from_theta(lambda t: np.interp(t, x, frozen), h.K, h.N, h.D, grid=x,
                                 label=f"smooth({h.label}, width={width:g})")
    centre = x.size // 2
    return rebuilt.shifted(float(h.log_h[centre] - rebuilt.log_h[centre]))


def uniform_distance(h1: MCPDensity, h2: MCPDensity) -> float:
    """sup |h1/|h1| - h2/|h2|| on the nodes of h1 (mass-normalized densities)."""
    a = h1.h(normalize=True)
    if h2.grid.shape == h1.grid.shape and np.allclose(h2.grid, h1.grid, rtol=0, atol=1e-12 * h1.D):
        b = h2.h(normalize=True)
    else:
        log_b = np.asarray(h2.log_h_at(np.clip(h1.grid, 0.0, h2.D)), dtype=float)
        b = np.exp(log_b - np.max(log_b))
        b = b / np.trapezoid(b, h1.grid)
    return float(np.max(np.abs(a - b)))


def log_deriv_distance(h: MCPDensity, reference: Callable) -> float:
    """L1 distance between T_h and a reference log-derivative over the interior nodes."""
    x = h.grid[1:-1]
    T_ref = np.asarray(reference(x), dtype=float)
    return float(np.trapezoid(np.abs(h.log_deriv[1:-1] - T_ref), x))
