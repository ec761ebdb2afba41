"""Comparison-geometry functions and the (p, K, N, D) parameter bundle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from pgap_ptrig import PExponent, pi_p
from pgap_utils import DomainError

# Relative slack when D is compared with the diameter bound
DIAMETER_SLACK = 1e-12


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-10
    atol: float = 1e-12
    lambda_tol: float = 1e-8
    endpoint_guard: float = 1e-12
    stop_guard: float = 1e-8
    underflow_band: float = 1e-6
    seed_offset: float = 1e-10
    max_doublings: int = 60
    samples: int = 2049
    validation_tol: float = 1e-10
    validation_pairs: int = 10
    scan_points: int = 64
    golden_tol: float = 1e-6
    keep_minima: int = 3

    @classmethod
    def from_config(cls, config: dict = None, **overrides) -> 'Tolerances':
        config = config or {}
        solver = config.get('Solver', {}) or {}
        sharp = config.get('Sharp', {}) or {}
        density = config.get('Density', {}) or {}
        values = {
            'rtol': solver.get('rtol'),
            'atol': solver.get('atol'),
            'lambda_tol': solver.get('lambda_tol'),
            'endpoint_guard': solver.get('endpoint_guard'),
            'stop_guard': solver.get('stop_guard'),
            'underflow_band': solver.get('underflow_band'),
            'seed_offset': solver.get('seed_offset'),
            'max_doublings': solver.get('max_doublings'),
            'samples': solver.get('samples'),
            'validation_tol': density.get('validation_tol'),
            'validation_pairs': density.get('validation_pairs'),
            'scan_points': sharp.get('scan_points'),
            'golden_tol': sharp.get('golden_tol'),
            'keep_minima': sharp.get('keep_minima'),
        }
        values.update(overrides)
        kinds = {f.name: f.type for f in fields(cls)}
        clean = {}
        for key, value in values.items():
            if value is None:
                continue
            clean[key] = int(value) if kinds[key] in (int, 'int') else float(value)
        return cls(**clean)


def s_kappa(theta, kappa: float):
    """sin / identity / sinh profile of curvature kappa."""
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(theta_arr < 0):
        raise DomainError(f"s_kappa needs theta >= 0 (got {theta})")
    if kappa > 0:
        limit = math.pi / math.sqrt(kappa)
        if np.any(theta_arr >= limit):
            raise DomainError(f"s_kappa needs theta < pi/sqrt(kappa) = {limit:.12g} (got {theta})")
        root = math.sqrt(kappa)
        out = np.sin(root * theta_arr) / root
    elif kappa == 0:
        out = theta_arr.copy()
    else:
        root = math.sqrt(-kappa)
        out = np.sinh(root * theta_arr) / root
    return float(out) if out.ndim == 0 else out


def log_s_kappa(theta, kappa: float):
    """ln s_kappa(theta), -inf where s_kappa vanishes; stable for large sinh arguments."""
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.full(theta_arr.shape, -np.inf)
    inside = theta_arr > 0
    if kappa > 0:
        inside &= theta_arr < math.pi / math.sqrt(kappa)
        root = math.sqrt(kappa)
        out[inside] = np.log(np.sin(root * theta_arr[inside]) / root)
    elif kappa == 0:
        out[inside] = np.log(theta_arr[inside])
    else:
        root = math.sqrt(-kappa)
        z = root * theta_arr[inside]
        out[inside] = z + np.log1p(-np.exp(-2.0 * z)) - math.log(2.0 * root)
    return float(out[0]) if np.ndim(theta) == 0 else out


def sigma_coeff(t: float, theta: float, K: float, N: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"sigma_coeff needs t in [0, 1] (got {t})")
    if theta < 0:
        raise ValueError(f"sigma_coeff needs theta >= 0 (got {theta})")
    k_theta2 = K * theta * theta
    if k_theta2 >= (N - 1.0) * math.pi ** 2:
        return math.inf
    if k_theta2 == 0:
        return float(t)
    if k_theta2 > 0:
        root = theta * math.sqrt(K / (N - 1.0))
        return math.sin(t * root) / math.sin(root)
    root = theta * math.sqrt(-K / (N - 1.0))
    return math.sinh(t * root) / math.sinh(root)


def diameter_bound(K: float, N: float) -> float:
    if not N > 1:
        raise ValueError(f"Dimension bound must satisfy N > 1 (got {N})")
    if K > 0:
        return math.pi / math.sqrt(K / (N - 1.0))
    return math.inf


def cot_knd(x, K: float, N: float, singular: str = 'inf'):
    """
    Log-derivative bound (N-1) s'/s at x, with s = s_{K/(N-1)}.

    Zeros of s (x = 0, and x = D_{K,N} when K > 0) give +inf / -inf when
    `singular='inf'` and raise DomainError when `singular='raise'`.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr < 0):
        raise DomainError(f"cot_knd needs x >= 0 (got {x})")
    bound = diameter_bound(K, N)
    if np.any(x_arr > bound * (1.0 + DIAMETER_SLACK)):
        raise DomainError(f"cot_knd needs x <= D_KN = {bound:.12g} (got {x})")
    at_zero = x_arr == 0
    at_bound = np.isfinite(bound) & (x_arr >= bound)
    if singular == 'raise' and (np.any(at_zero) or np.any(at_bound)):
        raise DomainError(f"cot_knd is singular at x={x}")

    out = np.empty_like(x_arr)
    regular = ~(at_zero | at_bound)
    xr = x_arr[regular]
    if K > 0:
        out[regular] = math.sqrt(K * (N - 1.0)) / np.tan(math.sqrt(K / (N - 1.0)) * xr)
    elif K == 0:
        out[regular] = (N - 1.0) / xr
    else:
        out[regular] = math.sqrt(-K * (N - 1.0)) / np.tanh(math.sqrt(-K / (N - 1.0)) * xr)
    out[at_zero] = np.inf
    out[at_bound] = -np.inf
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class Params:
    p: PExponent
    K: float
    N: float
    D: float
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if not isinstance(self.p, PExponent):
            object.__setattr__(self, 'p', PExponent(self.p))
        K, N, D = float(self.K), float(self.N), float(self.D)
        if not (math.isfinite(K) and math.isfinite(N)):
            raise ValueError(f"K and N must be finite (got K={self.K}, N={self.N})")
        if not N > 1:
            raise ValueError(f"Dimension bound must satisfy N > 1 (got {N})")
        if not (math.isfinite(D) and D > 0):
            raise ValueError(f"Diameter must satisfy 0 < D < inf (got {self.D})")
        bound = diameter_bound(K, N)
        if D > bound:
            if D > bound * (1.0 + DIAMETER_SLACK):
                raise ValueError(f"K > 0 needs D <= D_KN = {bound:.12g} (got D={D})")
            D = bound
        object.__setattr__(self, 'K', K)
        object.__setattr__(self, 'N', N)
        object.__setattr__(self, 'D', D)

    @property
    def exponent(self) -> float:
        return self.p.p

    @property
    def kappa(self) -> float:
        return self.K / (self.N - 1.0)

    @property
    def diameter_bound(self) -> float:
        return diameter_bound(self.K, self.N)

    @property
    def half_period(self) -> float:
        return 0.5 * pi_p(self.p)

    def alpha(self, lam: float) -> float:
        return (max(lam, 0.0) / (self.exponent - 1.0)) ** (1.0 / self.exponent)

    def lambda_of_alpha(self, alpha: float) -> float:
        return (self.exponent - 1.0) * alpha ** self.exponent

    def with_D(self, D: float) -> 'Params':
        return replace(self, D=D)

    def scaled(self, c: float) -> 'Params':
        """Same problem on [0, cD]: K' = K / c^2."""
        if not c > 0:
            raise ValueError(f"Scale factor must be positive (got {c})")
        return replace(self, K=self.K / (c * c), D=self.D * c)

    def key(self) -> tuple:
        return (self.exponent, self.K, self.N, self.D)


def _check_interval(x, params: Params):
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > params.D * (1.0 + DIAMETER_SLACK)):
        raise ValueError(f"x must lie in [0, D={params.D}] (got {x})")
    return np.clip(x_arr, 0.0, params.D)


def log_model_h1(x, params: Params):
    x_arr = _check_interval(x, params)
    out = (params.N - 1.0) * np.atleast_1d(log_s_kappa(x_arr, params.kappa))
    return float(out[0]) if np.ndim(x) == 0 else out


def log_model_h2(x, params: Params):
    x_arr = _check_interval(x, params)
    out = (params.N - 1.0) * np.atleast_1d(log_s_kappa(params.D - x_arr, params.kappa))
    return float(out[0]) if np.ndim(x) == 0 else out


def log_model_h(x, params: Params):
    """ln h_{K,N,D}: h^2 on [0, D/2), h^1 on [D/2, D]."""
    x_arr = np.atleast_1d(_check_interval(x, params))
    out = np.where(x_arr >= 0.5 * params.D,
                   np.atleast_1d(log_model_h1(x_arr, params)),
                   np.atleast_1d(log_model_h2(x_arr, params)))
    return float(out[0]) if np.ndim(x) == 0 else out


def model_h1(x, params: Params):
    return np.exp(log_model_h1(x, params))


def model_h2(x, params: Params):
    return np.exp(log_model_h2(x, params))


def model_h(x, params: Params):
    return np.exp(log_model_h(x, params))


def model_T(x, params: Params, side: int = 1, singular: str = 'inf'):
    """
    Log-derivative of h_{K,N,D}. At x = D/2 the right branch is returned
    (side=+1) or the left one (side=-1).
    """
    x_arr = np.atleast_1d(_check_interval(x, params))
    half = 0.5 * params.D
    right = (x_arr > half) | ((x_arr == half) & (side > 0))
    out = np.empty_like(x_arr)
    if np.any(right):
        out[right] = np.atleast_1d(cot_knd(x_arr[right], params.K, params.N, singular=singular))
    if np.any(~right):
        out[~right] = -np.atleast_1d(cot_knd(params.D - x_arr[~right], params.K, params.N, singular=singular))
    return float(out[0]) if np.ndim(x) == 0 else out


def model_T_jump(params: Params) -> float:
    """Right minus left limit of model_T at D/2."""
    return 2.0 * cot_knd(0.5 * params.D, params.K, params.N)


def cot_kernel(K: float, N: float):
    """Scalar cot_{K,N,D} for interior points, without array overhead."""
    if K > 0:
        scale, rate = math.sqrt(K * (N - 1.0)), math.sqrt(K / (N - 1.0))
        return lambda x: scale / math.tan(rate * x) if x > 0 else math.inf
    if K == 0:
        return lambda x: (N - 1.0) / x if x > 0 else math.inf
    scale, rate = math.sqrt(-K * (N - 1.0)), math.sqrt(-K / (N - 1.0))
    return lambda x: scale / math.tanh(rate * x) if x > 0 else math.inf


def model_T_kernel(params: Params):
    """Scalar model_T (right branch at D/2) for the shooting solvers."""
    cot = cot_kernel(params.K, params.N)
    D = params.D
    half = 0.5 * D

    def T_at(x: float) -> float:
        if x >= half:
            return cot(x)
        return -cot(D - x)
    return T_at
