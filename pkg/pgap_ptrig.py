"""
Generalized p-trigonometric functions.

sin_p is the inverse of F(s) = int_0^s (1 - |t|^p)^(-1/p) dt on [-pi_p/2, pi_p/2],
extended by sin_p(pi_p - t) = sin_p(t) and 2*pi_p periodicity. The substitution
w = t^p turns F into a regularized incomplete beta function,

    F(s) = (pi_p / 2) * I_{s^p}(1/p, 1 - 1/p),

so sin_p and cos_p come straight out of scipy's betaincinv. Near the quarter
period the complementary function I_{1-x}(1 - 1/p, 1/p) is inverted instead,
which gives |cos_p|^p directly and keeps the identity exact there.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from pgap_utils import SolverError

logger = logging.getLogger('pgap.ptrig')


@dataclass(frozen=True)
class PExponent:
    p: float

    def __post_init__(self):
        value = float(self.p)
        if not math.isfinite(value) or value <= 1.0:
            raise ValueError(f"Exponent must satisfy p > 1 (got {self.p})")
        object.__setattr__(self, 'p', value)

    def __float__(self):
        return self.p


def as_exponent(p) -> float:
    """Return p as a validated float."""
    if isinstance(p, PExponent):
        return p.p
    return PExponent(p).p


def pi_p(p) -> float:
    q = as_exponent(p)
    return 2.0 * math.pi / (q * math.sin(math.pi / q))


@dataclass(frozen=True, eq=False)
class PTrigTable:
    """
    Quarter-period table of sin_p.

    Values are laid out uniformly in s = sin_p(t) on [0, 1]; the nodes are their
    exact images t = F(s). `error_bound` is the largest disagreement between the
    forward map F and the betaincinv evaluation used by sin_cos_p.
    """
    p: PExponent
    half_period: float
    a: float
    b: float
    nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    error_bound: float = 0.0
    tol: float = 1e-10

    @classmethod
    def build(cls, p, n_nodes: int = 1025, tol: float = 1e-10) -> 'PTrigTable':
        exponent = p if isinstance(p, PExponent) else PExponent(p)
        q = exponent.p
        if n_nodes < 2:
            raise ValueError("A trig table needs at least two nodes")
        half = 0.5 * pi_p(q)
        a, b = 1.0 / q, 1.0 - 1.0 / q

        values = np.linspace(0.0, 1.0, int(n_nodes))
        nodes = half * special.betainc(a, b, values ** q)
        nodes[0], nodes[-1] = 0.0, half

        if np.any(np.diff(nodes) <= 0):
            raise SolverError(f"sin_p table nodes not strictly increasing for p={q}")

        table = cls(exponent, half, a, b, nodes, values, 0.0, float(tol))
        residual = np.abs(_sin_cos_array(nodes, table)[0] - values)
        error_bound = float(np.max(residual))
        if error_bound > tol:
            raise SolverError(f"sin_p inversion error {error_bound:.3e} exceeds tolerance {tol:.1e} for p={q}")
        object.__setattr__(table, 'error_bound', error_bound)
        for arr in (nodes, values):
            arr.setflags(write=False)
        logger.debug(f"Built sin_p table p={q} nodes={n_nodes} error={error_bound:.2e}")
        return table


@lru_cache(maxsize=64)
def trig_table(p: float, n_nodes: int = 1025, tol: float = 1e-10) -> PTrigTable:
    return PTrigTable.build(float(p), n_nodes=n_nodes, tol=tol)


def _constants(p) -> tuple:
    q = as_exponent(p)
    half = 0.5 * pi_p(q)
    return q, half, 1.0 / q, 1.0 - 1.0 / q


def _sin_cos_array(t, table: PTrigTable):
    q, half, a, b = table.p.p, table.half_period, table.a, table.b
    t = np.asarray(t, dtype=float)
    r = np.mod(t + half, 4.0 * half) - half
    mirrored = r > half
    r = np.where(mirrored, 2.0 * half - r, r)
    r = np.clip(r, -half, half)

    mag = np.abs(r)
    u = mag / half
    low = u <= 0.5
    x = np.empty_like(u)
    y = np.empty_like(u)
    x[low] = special.betaincinv(a, b, u[low])
    y[low] = 1.0 - x[low]
    rest = (half - mag[~low]) / half
    y[~low] = special.betaincinv(b, a, rest)
    x[~low] = 1.0 - y[~low]

    s = np.copysign(np.power(np.clip(x, 0.0, 1.0), 1.0 / q), r)
    c = np.power(np.clip(y, 0.0, 1.0), 1.0 / q)
    c = np.where(mirrored, -c, c)
    return s, c


def _sin_cos_scalar(t: float, q: float, half: float, a: float, b: float):
    r = math.fmod(t + half, 4.0 * half)
    if r < 0.0:
        r += 4.0 * half
    r -= half
    sign_c = 1.0
    if r > half:
        r = 2.0 * half - r
        sign_c = -1.0
    mag = min(abs(r), half)
    u = mag / half
    if u <= 0.5:
        x = float(special.betaincinv(a, b, u))
        y = 1.0 - x
    else:
        y = float(special.betaincinv(b, a, (half - mag) / half))
        x = 1.0 - y
    s = math.copysign(max(x, 0.0) ** (1.0 / q), r)
    c = sign_c * max(y, 0.0) ** (1.0 / q)
    return s, c


def sin_cos_p(t, p):
    """Return (sin_p(t), cos_p(t)); scalars in, floats out."""
    if np.ndim(t) == 0:
        q, half, a, b = _constants(p)
        return _sin_cos_scalar(float(t), q, half, a, b)
    return _sin_cos_array(t, trig_table(as_exponent(p)))


def sin_p(t, p):
    return sin_cos_p(t, p)[0]


def cos_p(t, p):
    return sin_cos_p(t, p)[1]


def signed_pow(x, q: float):
    """sign(x) * |x|**q, for q > 0."""
    if not q > 0:
        raise ValueError(f"signed_pow needs a positive exponent (got {q})")
    if np.ndim(x) == 0:
        x = float(x)
        return math.copysign(abs(x) ** q, x) if x != 0.0 else 0.0
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** q


def identity_violation(p, n: int = 10_000) -> float:
    """Largest | |sin_p|^p + |cos_p|^p - 1 | on n points of [-2 pi_p, 2 pi_p]."""
    q = as_exponent(p)
    span = 2.0 * pi_p(q)
    t = np.linspace(-span, span, int(n))
    s, c = sin_cos_p(t, q)
    return float(np.max(np.abs(np.abs(s) ** q + np.abs(c) ** q - 1.0)))


def sin_cos_kernel(p):
    """Scalar (sin_p, cos_p) evaluator with the constants for p bound once."""
    q, half, a, b = _constants(p)

    def kernel(t: float):
        return _sin_cos_scalar(t, q, half, a, b)
    return kernel
