"""
Discretized Rayleigh-quotient minimizer for the weighted p-Laplace Neumann gap.

    R(u) = sum |(u_{i+1} - u_i) / dx|^p hbar_i dx  /  sum |u_j|^p w_j

with hbar at cell midpoints and trapezoid weights w_j = h_j dx (halved at the ends).
Minimizing R over the constraint sum u|u|^(p-2) w = 0 equals minimizing the
shift-invariant F(u) = R(u - c(u)), where c(u) is the unique root of the
constraint; the gradient of F is the gradient of R at the shifted point.

Nothing here uses the p-trigonometric functions or the shooting solver.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.optimize import bisect
from scipy.sparse.linalg import eigsh

from pgap_utils import spawn_rng, worker_count

logger = logging.getLogger('pgap.oracle')

ARMIJO_C1 = 1e-4
MIN_STEP = 1e-12
SHIFT_FRACTION = 0.05
REGULARIZATION = 1e-3


def _spow(x, q: float):
    return np.sign(x) * np.abs(x) ** q


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    D: float
    p: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    cell_weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 1):
            raise ValueError(f"Exponent must satisfy p > 1 (got {self.p})")
        if self.nodes.size < 3 or self.weights.shape != self.nodes.shape:
            raise ValueError("Discrete problem needs matching node and weight arrays with at least 3 nodes")
        if self.cell_weights.size != self.nodes.size - 1:
            raise ValueError("Need one cell weight per cell")
        if np.any(self.weights < 0) or np.any(self.cell_weights < 0) or not np.any(self.weights > 0):
            raise ValueError("Weights must be nonnegative with positive total mass")

    @property
    def M(self) -> int:
        return self.nodes.size - 1

    @property
    def dx(self) -> float:
        return self.D / self.M

    @property
    def quadrature(self) -> np.ndarray:
        """Trapezoid node weights h_j dx."""
        w = self.weights * self.dx
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @classmethod
    def from_log_h(cls, log_h_at: Callable, D: float, p: float, M: int = 8192) -> 'DiscreteProblem':
        if int(M) < 2:
            raise ValueError(f"Oracle mesh needs M >= 2 (got {M})")
        nodes = np.linspace(0.0, D, int(M) + 1)
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        with np.errstate(divide='ignore'):
            log_nodes = np.asarray(log_h_at(nodes), dtype=float)
            log_mids = np.asarray(log_h_at(mids), dtype=float)
        top = max(np.max(log_nodes), np.max(log_mids))
        if not math.isfinite(top):
            raise ValueError("Density vanishes on the whole mesh")
        return cls(float(D), float(p), nodes, np.exp(log_nodes - top), np.exp(log_mids - top))

    @classmethod
    def from_density(cls, h, p, M: int = 8192) -> 'DiscreteProblem':
        return cls.from_log_h(lambda x: h.log_h_at(np.clip(x, 0.0, h.D)), h.D, float(p), M)

    @classmethod
    def uniform(cls, D: float, p: float, M: int = 8192) -> 'DiscreteProblem':
        return cls.from_log_h(np.zeros_like, D, p, M)


@dataclass(eq=False)
class OracleResult:
    value: float
    converged: bool
    iterations: int
    grad_ratio: float
    constraint_residual: float
    spread: float
    values: list
    history: list = field(default_factory=list, repr=False)
    u: np.ndarray = field(default=None, repr=False)
    M: int = 0

    def to_dict(self) -> dict:
        return {
            'lambda': self.value,
            'converged': self.converged,
            'iterations': self.iterations,
            'grad_ratio': self.grad_ratio,
            'constraint_residual': self.constraint_residual,
            'spread': self.spread,
            'restart_values': self.values,
            'M': self.M,
        }


def _energy(u: np.ndarray, prob: DiscreteProblem) -> tuple:
    d = np.diff(u) / prob.dx
    numerator = float(np.sum(np.abs(d) ** prob.p * prob.cell_weights) * prob.dx)
    denominator = float(np.sum(np.abs(u) ** prob.p * prob.quadrature))
    return numerator, denominator


def rayleigh_value(u, prob: DiscreteProblem) -> float:
    u = np.asarray(u, dtype=float)
    if u.shape != prob.nodes.shape:
        raise ValueError(f"u needs {prob.nodes.size} node values (got {u.size})")
    numerator, denominator = _energy(u, prob)
    if denominator == 0:
        raise ValueError("Rayleigh quotient undefined: zero weighted norm")
    return numerator / denominator


def constraint_value(u, prob: DiscreteProblem) -> float:
    return float(np.sum(_spow(np.asarray(u, dtype=float), prob.p - 1.0) * prob.quadrature))


def zero_mean_shift(u, prob: DiscreteProblem) -> np.ndarray:
    """u - c with sum (u-c)|u-c|^(p-2) w = 0; the left side decreases strictly in c."""
    u = np.asarray(u, dtype=float)
    lo, hi = float(np.min(u)), float(np.max(u))
    if hi == lo:
        return u - lo

    def G(c):
        return constraint_value(u - c, prob)

    g_lo, g_hi = G(lo), G(hi)
    if g_lo == 0:
        return u - lo
    if g_hi == 0:
        return u - hi
    c = bisect(G, lo, hi, xtol=1e-14 * (hi - lo), maxiter=400)
    return u - c


def rayleigh_gradient(u, prob: DiscreteProblem) -> tuple:
    """(R(u), grad R(u)) with grad A_j = g_{j-1} - g_j and g_i = p (d_i)^(p-1) hbar_i."""
    p = prob.p
    d = np.diff(u) / prob.dx
    numerator, denominator = _energy(u, prob)
    if denominator == 0:
        raise ValueError("Rayleigh quotient undefined: zero weighted norm")
    R = numerator / denominator
    g = p * _spow(d, p - 1.0) * prob.cell_weights
    grad_A = np.zeros_like(u)
    grad_A[1:] += g
    grad_A[:-1] -= g
    grad_B = p * prob.quadrature * _spow(u, p - 1.0)
    return R, (grad_A - R * grad_B) / denominator


def _preconditioner(u: np.ndarray, prob: DiscreteProblem, R: float) -> np.ndarray:
    """Banded K_w + mu M_w: regularized second derivatives of numerator and denominator."""
    p = prob.p
    d = np.diff(u) / prob.dx
    delta = REGULARIZATION * max(float(np.max(np.abs(d))), 1e-300)
    delta_u = REGULARIZATION * max(float(np.max(np.abs(u))), 1e-300)
    k = p * (p - 1.0) * (d * d + delta * delta) ** (0.5 * (p - 2.0)) * prob.cell_weights / prob.dx
    m = p * (p - 1.0) * prob.quadrature * (u * u + delta_u * delta_u) ** (0.5 * (p - 2.0))
    mu = SHIFT_FRACTION * R

    n = u.size
    ab = np.zeros((3, n))
    ab[0, 1:] = -k
    ab[2, :-1] = -k
    ab[1, :] = mu * m
    ab[1, :-1] += k
    ab[1, 1:] += k
    # keep the system nonsingular where the weight vanishes
    ab[1, :] = np.maximum(ab[1, :], 1e-300)
    return ab


def _normalize(u: np.ndarray, prob: DiscreteProblem) -> np.ndarray:
    u = zero_mean_shift(u, prob)
    _, denominator = _energy(u, prob)
    if denominator == 0:
        raise ValueError("Rayleigh quotient undefined: zero weighted norm")
    return u / denominator ** (1.0 / prob.p)


def descend(u0, prob: DiscreteProblem, max_iter: int = 500, gtol: float = 1e-6) -> dict:
    """Preconditioned gradient descent with Armijo backtracking from one start."""
    u = _normalize(np.asarray(u0, dtype=float), prob)
    R, grad = rayleigh_gradient(u, prob)
    history = [R]
    g0 = None
    g = math.inf
    converged = False
    iterations = 0
    for iterations in range(1, int(max_iter) + 1):
        direction = solve_banded((1, 1), _preconditioner(u, prob, R), grad)
        slope = float(grad @ direction)
        g = math.sqrt(max(slope, 0.0))
        if g0 is None:
            g0 = g
        if g <= gtol * g0 or float(np.linalg.norm(grad) * np.linalg.norm(u)) <= 1e-9 * R:
            converged = True
            break
        if slope <= 0:
            direction, slope = grad, float(grad @ grad)

        t = 1.0
        accepted = False
        while t >= MIN_STEP:
            trial = _normalize(u - t * direction, prob)
            R_trial = rayleigh_value(trial, prob)
            if R_trial <= R - ARMIJO_C1 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            logger.debug(f"Line search stalled at iteration {iterations} (R={R:.12g})")
            break
        u = trial
        R, grad = rayleigh_gradient(u, prob)
        history.append(R)

    return {
        'u': u,
        'value': R,
        'converged': converged,
        'iterations': iterations,
        'grad_ratio': g / g0 if g0 else 0.0,
        'history': history,
    }


def _second_eigenvector(prob: DiscreteProblem) -> np.ndarray:
    """Discrete p = 2 eigenvector with the same weights (first nonconstant mode)."""
    x = prob.nodes
    try:
        k = prob.cell_weights / prob.dx
        main = np.zeros(x.size)
        main[:-1] += k
        main[1:] += k
        stiffness = sparse.diags([-k, main, -k], [-1, 0, 1], format='csc')
        mass = sparse.diags(prob.quadrature, 0, format='csc')
        vals, vecs = eigsh(stiffness, k=2, M=mass, sigma=-1.0, which='LM')
        return np.asarray(vecs[:, int(np.argmax(vals))], dtype=float)
    except Exception as e:
        logger.debug(f"p=2 warm start unavailable ({e}); using cos(pi x / D)")
        return np.cos(math.pi * x / prob.D)


def initial_guesses(prob: DiscreteProblem, restarts: int, seed: int = 0) -> list:
    """Linear profile, the p = 2 eigenvector, then random smooth cosine perturbations."""
    x = prob.nodes
    starts = [x - 0.5 * prob.D]
    if restarts > 1:
        starts.append(_second_eigenvector(prob))
    for index in range(2, int(restarts)):
        rng = spawn_rng(seed, index)
        u = np.cos(math.pi * x / prob.D)
        for mode, a in enumerate(rng.normal(0.0, 0.3, size=4), start=2):
            u = u + a / mode * np.cos(mode * math.pi * x / prob.D)
        starts.append(u)
    return starts[:max(int(restarts), 1)]


def minimize_gap(prob: DiscreteProblem, restarts: int = 3, max_iter: int = 500, gtol: float = 1e-6,
                 seed: int = 0, workers: int = None) -> OracleResult:
    """Best Rayleigh value over the restarts; ties go to the lowest restart index."""
    starts = initial_guesses(prob, restarts, seed)
    runs = [None] * len(starts)
    with ThreadPoolExecutor(max_workers=workers or worker_count()) as executor:
        futures = {executor.submit(descend, u0, prob, max_iter, gtol): i for i, u0 in enumerate(starts)}
        for future in as_completed(futures):
            runs[futures[future]] = future.result()

    values = [r['value'] for r in runs]
    best_index = min(range(len(runs)), key=lambda i: (values[i], i))
    best = runs[best_index]
    if not best['converged']:
        logger.warning(f"Oracle did not converge within {max_iter} iterations "
                       f"(grad ratio {best['grad_ratio']:.2e}); returning best value")
    u = best['u']
    _, denominator = _energy(u, prob)
    residual = abs(constraint_value(u, prob)) / denominator
    spread = (max(values) - min(values)) / min(values)
    return OracleResult(best['value'], best['converged'], best['iterations'], best['grad_ratio'],
                        residual, spread, values, best['history'], u, prob.M)


def mesh_study(build: Callable[[int], DiscreteProblem], Ms, **kwargs) -> pd.DataFrame:
    """Oracle values on a sequence of meshes; `difference` is the change from the previous mesh."""
    rows = []
    previous = None
    for M in Ms:
        result = minimize_gap(build(int(M)), **kwargs)
        rows.append({'M': int(M), 'lambda': result.value, 'converged': result.converged,
                     'difference': None if previous is None else abs(result.value - previous)})
        previous = result.value
    return pd.DataFrame(rows, columns=['M', 'lambda', 'converged', 'difference'])
