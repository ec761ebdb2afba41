"""
Prufer phase equation of the weighted p-Laplace eigenproblem

    (u'|u'|^(p-2))' + T u'|u'|^(p-2) + lambda u|u|^(p-2) = 0,    T = (ln h)'.

With alpha u = e sin_p(phi), u' = e cos_p(phi) and alpha = (lambda/(p-1))^(1/p):

    phi' = alpha + T cos_p(phi)^(p-1) sin_p(phi) / (p-1)
    (ln e)' = -T |cos_p(phi)|^p / (p-1)

where cos_p^(p-1) is the signed power |cos_p|^(p-2) cos_p throughout.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from pgap_geometry import Params
from pgap_ptrig import pi_p, signed_pow, sin_cos_kernel, sin_cos_p
from pgap_utils import SolverError

logger = logging.getLogger('pgap.pruefer')


@dataclass(eq=False)
class PrueferTrajectory:
    params: Params
    lam: float
    alpha: float
    xs: np.ndarray = field(repr=False)
    phis: np.ndarray = field(repr=False)
    a_hit: float = None
    b_hit: float = None
    segment_ids: np.ndarray = field(default=None, repr=False)
    a_residual: float = None
    b_residual: float = None
    monotonicity_violations: int = 0
    steps: int = 0

    @property
    def has_hits(self) -> bool:
        return self.a_hit is not None and self.b_hit is not None

    def diagnostics(self) -> dict:
        D = self.params.D
        return {
            'a_hit': self.a_hit,
            'b_hit': self.b_hit,
            'a_gap': None if self.a_hit is None else self.a_hit,
            'b_gap': None if self.b_hit is None else D - self.b_hit,
            'a_phase_residual': self.a_residual,
            'b_phase_residual': self.b_residual,
            'monotonicity_violations': self.monotonicity_violations,
            'steps': self.steps,
        }


@dataclass(eq=False)
class Eigenfunction:
    lam: float
    xs: np.ndarray = field(repr=False)
    phis: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    uprime: np.ndarray = field(repr=False)
    e: np.ndarray = field(repr=False)
    segment_ids: np.ndarray = field(repr=False)


def phase_rhs(x: float, phi: float, T_at: Callable, params: Params, lam: float) -> float:
    alpha = params.alpha(lam)
    s, c = sin_cos_p(phi, params.p)
    if c == 0.0 or s == 0.0:
        return alpha
    T = T_at(x)
    if not math.isfinite(T):
        raise SolverError(f"log-derivative is not finite at x={x:.17g}")
    p = params.exponent
    return alpha + T * signed_pow(c, p - 1.0) * s / (p - 1.0)


def _segments(x0: float, stop: float, breaks, direction: int) -> list:
    inner = sorted(b for b in breaks if min(x0, stop) < b < max(x0, stop))
    if direction < 0:
        inner = inner[::-1]
    points = [x0] + inner + [stop]
    return list(zip(points[:-1], points[1:]))


def _one_sided(T_at: Callable, lo: float, hi: float, guard: float) -> Callable:
    """Evaluate T strictly inside [lo, hi] so a jump at a segment end is seen from the correct side."""
    left, right = lo + guard, hi - guard
    if left > right:
        left = right = 0.5 * (lo + hi)

    def T_segment(x):
        return T_at(min(max(x, left), right))
    return T_segment


def integrate_phase(T_at: Callable, params: Params, lam: float, x0: float, phi0: float, direction: int = 1,
                    breaks=(), stop: float = None, sample: bool = True) -> PrueferTrajectory:
    """
    Integrate the phase equation from (x0, phi0) towards x0 + direction * inf until phi
    reaches +pi_p/2 (forward) or -pi_p/2 (backward), or until the guarded endpoint.

    With the default stop the endpoint itself is decided from
    Theta = phi(stop) + alpha |endpoint - stop| - pi_p/2: a non-negative Theta counts as a
    hit at the linearly extrapolated crossing. Step underflow within the underflow band of
    the endpoint ends the shot the same way instead of failing.
    """
    D = params.D
    tol = params.tol
    guard = tol.endpoint_guard * D
    if not 0.0 < x0 < D:
        raise ValueError(f"Seed must lie inside (0, D) (got x0={x0})")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0 (got {lam})")
    direction = 1 if direction > 0 else -1
    bound = D if direction > 0 else 0.0
    default_stop = stop is None
    if default_stop:
        stop = bound - direction * max(tol.stop_guard * D, guard)
        if direction * (stop - x0) <= 0:
            stop = 0.5 * (x0 + bound)

    p = params.exponent
    q = p - 1.0
    alpha = params.alpha(lam)
    half = 0.5 * pi_p(p)
    target = direction * half
    trig = sin_cos_kernel(p)

    def event(x, y):
        return y[0] - target
    event.terminal = True
    event.direction = direction

    xs_parts, phi_parts, id_parts = [], [], []
    hit, residual, steps = None, None, 0
    reached, extrapolated = x0, False
    phi = float(phi0)
    for seg_id, (lo, hi) in enumerate(_segments(x0, stop, breaks, direction)):
        T_seg = _one_sided(T_at, min(lo, hi), max(lo, hi), guard)

        def rhs(x, y, T_seg=T_seg):
            s, c = trig(float(y[0]))
            if c == 0.0 or s == 0.0:
                return [alpha]
            T = T_seg(x)
            if not math.isfinite(T):
                raise SolverError(f"log-derivative is not finite at x={x:.17g}")
            return [alpha + T * signed_pow(c, q) * s / q]

        sol = solve_ivp(rhs, (lo, hi), [phi], method='RK45', rtol=tol.rtol, atol=tol.atol,
                        dense_output=sample, events=event)
        steps += sol.t.size - 1
        end = hi
        underflow = sol.status == -1
        if underflow:
            end = float(sol.t[-1])
            if not default_stop or abs(bound - end) > tol.underflow_band * D:
                raise SolverError(f"Phase integration failed at x={end:.17g}: {sol.message}")
            logger.debug("Step underflow at x=%.17g, %.3g from the endpoint; shot ends there",
                         end, abs(bound - end))

        if sol.t_events[0].size:
            end = float(sol.t_events[0][0])
            hit = end
            residual = abs(float(sol.y_events[0][0][0]) - target)
        if sample:
            xs = np.linspace(lo, end, max(int(tol.samples), 2))
            xs_parts.append(xs)
            phi_parts.append(sol.sol(xs)[0])
            id_parts.append(np.full(xs.size, seg_id))
        phi = float(sol.y[0][-1])
        reached = end
        if hit is not None or underflow:
            break

    if hit is None and default_stop and alpha > 0:
        gap = half - direction * phi
        theta = alpha * abs(bound - reached) - gap
        if theta >= 0:
            hit = reached + direction * max(gap, 0.0) / alpha
            residual = max(gap, 0.0)
            extrapolated = True

    if sample:
        xs = np.concatenate(xs_parts)
        phis = np.concatenate(phi_parts)
        ids = np.concatenate(id_parts)
        if hit is not None and not extrapolated:
            phis[-1] = target
        if direction < 0:
            xs, phis, ids = xs[::-1], phis[::-1], ids[::-1]
    else:
        xs = np.array([x0, reached])
        phis = np.array([phi0, phi])
        ids = np.zeros(2, dtype=int)

    violations = int(np.sum(np.diff(phis) < -1e-12)) if sample else 0
    traj = PrueferTrajectory(params, float(lam), alpha, xs, phis, segment_ids=ids, steps=steps,
                             monotonicity_violations=violations)
    if direction > 0:
        traj.b_hit, traj.b_residual = hit, residual
    else:
        traj.a_hit, traj.a_residual = hit, residual
    return traj


def shoot_from_center(T_at: Callable, params: Params, lam: float, breaks=(), sample: bool = True) -> PrueferTrajectory:
    """Seed phi(D/2) = 0 and integrate both ways."""
    centre = 0.5 * params.D
    right = integrate_phase(T_at, params, lam, centre, 0.0, +1, breaks=breaks, sample=sample)
    left = integrate_phase(T_at, params, lam, centre, 0.0, -1, breaks=breaks, sample=sample)
    offset = int(left.segment_ids.max()) + 1
    traj = PrueferTrajectory(
        params, float(lam), right.alpha,
        np.concatenate([left.xs, right.xs]),
        np.concatenate([left.phis, right.phis]),
        a_hit=left.a_hit, b_hit=right.b_hit,
        segment_ids=np.concatenate([left.segment_ids.max() - left.segment_ids, right.segment_ids + offset]),
        a_residual=left.a_residual, b_residual=right.b_residual,
        monotonicity_violations=left.monotonicity_violations + right.monotonicity_violations,
        steps=left.steps + right.steps,
    )
    return traj


def shoot_from_left(T_at: Callable, params: Params, lam: float, breaks=(), seed: float = None, sample: bool = True) -> PrueferTrajectory:
    """Seed phi = -pi_p/2 just inside x = 0, where the right-hand side equals alpha for any T."""
    x0 = params.tol.seed_offset * params.D if seed is None else float(seed)
    traj = integrate_phase(T_at, params, lam, x0, -0.5 * pi_p(params.p), +1, breaks=breaks, sample=sample)
    traj.a_hit, traj.a_residual = x0, 0.0
    return traj


def _segment_values(T_at: Callable, xs: np.ndarray, ids: np.ndarray, guard: float) -> np.ndarray:
    out = np.empty_like(xs)
    for seg in np.unique(ids):
        mask = ids == seg
        lo, hi = float(xs[mask].min()), float(xs[mask].max())
        T_seg = _one_sided(T_at, lo, hi, guard)
        out[mask] = [T_seg(float(x)) for x in xs[mask]]
    return out


def reconstruct_eigenfunction(traj: PrueferTrajectory, T_at: Callable, params: Params) -> Eigenfunction:
    """
    Recover u, u' on [a_hit, b_hit] from the phase: ln e is the integral of
    -T |cos_p(phi)|^p / (p-1), normalized so that e(D/2) = 1.
    """
    if not traj.has_hits:
        raise SolverError("Eigenfunction reconstruction needs a trajectory with both hitting points")
    p = params.exponent
    keep = (traj.xs >= traj.a_hit) & (traj.xs <= traj.b_hit)
    xs, phis, ids = traj.xs[keep], traj.phis[keep], traj.segment_ids[keep]
    s, c = sin_cos_p(phis, params.p)

    guard = params.tol.endpoint_guard * params.D
    T = _segment_values(T_at, xs, ids, guard)
    integrand = np.where(c == 0.0, 0.0, -T * np.abs(c) ** p / (p - 1.0))
    log_e = cumulative_trapezoid(integrand, xs, initial=0.0)
    log_e -= np.interp(0.5 * params.D, xs, log_e)
    e = np.exp(log_e)
    return Eigenfunction(traj.lam, xs, phis, e * s / traj.alpha, e * c, e, ids)


def _normalized(eig: Eigenfunction):
    scale = float(np.max(np.abs(eig.u)))
    if scale == 0:
        raise SolverError("Reconstructed eigenfunction vanishes identically")
    return eig.u / scale, eig.uprime / scale


def equation_residual(eig: Eigenfunction, T_at: Callable, params: Params) -> float:
    """L1 norm of (u'|u'|^(p-2))' + T u'|u'|^(p-2) + lambda u|u|^(p-2) for max|u| = 1."""
    p = params.exponent
    u, up = _normalized(eig)
    guard = params.tol.endpoint_guard * params.D
    T = _segment_values(T_at, eig.xs, eig.segment_ids, guard)
    flux = signed_pow(up, p - 1.0)
    total = 0.0
    for seg in np.unique(eig.segment_ids):
        mask = eig.segment_ids == seg
        if mask.sum() < 3:
            continue
        x = eig.xs[mask]
        dflux = np.gradient(flux[mask], x)
        r = dflux + T[mask] * flux[mask] + eig.lam * signed_pow(u[mask], p - 1.0)
        total += float(np.trapezoid(np.abs(r), x))
    return total


def constraint_residual(eig: Eigenfunction, log_h_at: Callable, params: Params) -> float:
    """|int u|u|^(p-2) h| / int |u|^p h over the samples."""
    p = params.exponent
    u, _ = _normalized(eig)
    log_h = np.asarray(log_h_at(eig.xs), dtype=float)
    h = np.exp(log_h - np.max(log_h))
    numerator, denominator = 0.0, 0.0
    for seg in np.unique(eig.segment_ids):
        mask = eig.segment_ids == seg
        if mask.sum() < 2:
            continue
        x = eig.xs[mask]
        numerator += float(np.trapezoid(signed_pow(u[mask], p - 1.0) * h[mask], x))
        denominator += float(np.trapezoid(np.abs(u[mask]) ** p * h[mask], x))
    if denominator == 0:
        raise SolverError("Eigenfunction has zero weighted norm")
    return abs(numerator) / denominator
