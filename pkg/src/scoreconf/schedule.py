"""Geometric noise schedules and Langevin step-size selection.

Three solvers live here:

* the initial scale from data (maximum pairwise Euclidean distance),
* the common ratio from the radial-overlap condition
  ``Phi(sqrt(2D)(g-1) + 3g) - Phi(sqrt(2D)(g-1) - 3g) = C``,
* the step-size parameter ``eps`` that drives the closed-form per-scale
  variance ratio ``s_T^2 / sigma_i^2`` as close to one as possible.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import _blocked
from .errors import DivergentRegimeError, InfeasibleTargetError, InvalidInputError

SCHEDULE_FORMAT_VERSION = 1
DEFAULT_TARGET_C = 0.5
DEFAULT_SUBSAMPLE = 10000
BISECTION_XTOL = 1e-12


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Descending geometric sequence of noise scales.

    ``sigmas[0]`` and ``sigmas[-1]`` are exactly the requested endpoints and
    consecutive ratios all equal ``gamma``.
    """

    sigmas: np.ndarray
    gamma: float
    D: int
    target_C: float | None = None

    def __post_init__(self):
        sigmas = np.asarray(self.sigmas, dtype=np.float64)
        if sigmas.ndim != 1 or sigmas.size < 2:
            raise InvalidInputError("a schedule needs at least two noise scales")
        if not np.all(np.isfinite(sigmas)) or np.any(sigmas <= 0):
            raise InvalidInputError("noise scales must be finite and positive")
        if np.any(np.diff(sigmas) >= 0):
            raise InvalidInputError("noise scales must be strictly decreasing")
        if int(self.D) < 1:
            raise InvalidInputError(f"dimensionality must be positive, got {self.D}")
        sigmas.setflags(write=False)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "D", int(self.D))

    @property
    def L(self) -> int:
        return int(self.sigmas.size)

    @property
    def sigma1(self) -> float:
        return float(self.sigmas[0])

    @property
    def sigmaL(self) -> float:
        return float(self.sigmas[-1])

    def step_sizes(self, epsilon: float) -> np.ndarray:
        """Per-scale step sizes ``alpha_i = eps * sigma_i^2 / sigma_L^2``."""
        return epsilon * (self.sigmas / self.sigmaL) ** 2

    def to_dict(self) -> dict:
        return {
            "version": SCHEDULE_FORMAT_VERSION,
            "sigma1": self.sigma1,
            "sigmaL": self.sigmaL,
            "L": self.L,
            "gamma": self.gamma,
            "D": self.D,
            "target_C": self.target_C,
            "sigmas": [float(s) for s in self.sigmas],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NoiseSchedule":
        version = doc.get("version")
        if version != SCHEDULE_FORMAT_VERSION:
            raise InvalidInputError(f"unsupported schedule format version {version!r}")
        sigmas = np.asarray(doc["sigmas"], dtype=np.float64)
        if sigmas.size != doc["L"]:
            raise InvalidInputError(f"schedule lists {sigmas.size} scales but declares L={doc['L']}")
        return cls(sigmas=sigmas, gamma=doc["gamma"], D=doc["D"], target_C=doc.get("target_C"))

    @property
    def schedule_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class LangevinConfig:
    epsilon: float
    T: int
    denoise: bool = True

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.T) != self.T or self.T < 1:
            raise InvalidInputError(f"T must be a positive integer, got {self.T}")
        object.__setattr__(self, "T", int(self.T))

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "T": self.T, "denoise": self.denoise}


def std_normal_cdf(x):
    """Standard normal CDF. Accepts scalars or arrays."""
    return ndtr(x)


# -- initial noise scale from data ----------------------------------------------


def _subsample(dataset, subsample, seed):
    x = np.asarray(dataset, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise InvalidInputError(f"need at least two points, got {x.shape[0]}")
    if subsample < 2:
        raise InvalidInputError(f"subsample must be at least 2, got {subsample}")
    if x.shape[0] > subsample:
        rows = np.random.default_rng(seed).choice(x.shape[0], size=subsample, replace=False)
        rows.sort()
        x = x[rows]
    return x


def _exact_pair(x, k):
    i, j = _blocked.pair_index(k, x.shape[0])
    return float(np.linalg.norm(x[i] - x[j]))


def pairwise_distances(dataset, subsample=DEFAULT_SUBSAMPLE, seed=0):
    """Flat array of all pairwise distances of the (sub)sampled rows."""
    return _blocked.upper_pair_dists(_subsample(dataset, subsample, seed))


def max_pairwise_distance(dataset, subsample=DEFAULT_SUBSAMPLE, seed=0) -> float:
    """Largest Euclidean distance among the (sub)sampled rows.

    Rows are drawn without replacement with ``numpy.random.default_rng(seed)``
    when there are more than ``subsample`` of them. The winning pair is
    re-measured by direct differencing so the Gram-expansion round-off
    does not leak into the result.
    """
    x = _subsample(dataset, subsample, seed)
    d = _blocked.upper_pair_dists(x)
    return _exact_pair(x, int(np.argmax(d)))


def median_pairwise_distance(dataset, subsample=DEFAULT_SUBSAMPLE, seed=0) -> float:
    x = _subsample(dataset, subsample, seed)
    d = _blocked.upper_pair_dists(x)
    return _median_refined(x, d)


def _median_refined(x, d):
    m = d.size
    lo_k = (m - 1) // 2
    hi_k = m // 2
    order = np.argpartition(d, (lo_k, hi_k))
    lo = _exact_pair(x, int(order[lo_k]))
    hi = _exact_pair(x, int(order[hi_k]))
    return 0.5 * (lo + hi)


def distance_summary(dataset, subsample=DEFAULT_SUBSAMPLE, seed=0) -> dict:
    """Max, median and mean pairwise distance from one shared subsample."""
    x = _subsample(dataset, subsample, seed)
    d = _blocked.upper_pair_dists(x)
    return {
        "max": _exact_pair(x, int(np.argmax(d))),
        "median": _median_refined(x, d),
        "mean": float(d.mean()),
        "n_points": int(x.shape[0]),
    }


# -- common ratio from radial overlap -------------------------------------------


def overlap_c(gamma: float, D: int) -> float:
    """Mass of the radial law at scale sigma_i inside the three-sigma band of sigma_{i-1}.

    With ``gamma = sigma_{i-1} / sigma_i`` and the radial laws approximated
    by ``N(sqrt(D) sigma, sigma^2 / 2)``.
    """
    if gamma < 1 or D < 1:
        raise InvalidInputError(f"need gamma >= 1 and D >= 1, got gamma={gamma}, D={D}")
    shift = math.sqrt(2.0 * D) * (gamma - 1.0)
    return float(std_normal_cdf(shift + 3.0 * gamma) - std_normal_cdf(shift - 3.0 * gamma))


def solve_gamma(D: int, target_C: float = DEFAULT_TARGET_C, xtol: float = BISECTION_XTOL) -> float:
    """Common ratio ``gamma > 1`` whose overlap equals ``target_C``.

    The overlap rises briefly above its ``gamma = 1`` value before decaying
    to zero (for D >= 5), so any target below ``overlap_c(1, D)`` has exactly
    one root on ``(1, inf)``: it lies on the decaying branch and a sign-change
    bisection started at 1 cannot land anywhere else.
    """
    if not 0.0 < target_C < 1.0:
        raise InvalidInputError(f"target_C must lie in (0, 1), got {target_C}")
    c_at_one = overlap_c(1.0, D)
    if target_C >= c_at_one:
        raise InfeasibleTargetError(
            f"target_C={target_C} is not below overlap_c(1, D)={c_at_one:.6f}; no gamma > 1 reaches it"
        )
    if math.sqrt(2.0 * D) <= 3.0:
        # the overlap never decays below its gamma = 1 value
        raise InfeasibleTargetError(f"D={D} is too small: overlap_c stays above {c_at_one:.6f} for all gamma > 1")

    lo = 1.0
    hi = 1.0 + 1.0 / math.sqrt(D)
    while overlap_c(hi, D) > target_C:
        lo, hi = hi, 1.0 + 2.0 * (hi - 1.0)
        if hi > 1e6:
            raise InfeasibleTargetError(f"could not bracket target_C={target_C} for D={D}")
    for _ in range(400):
        if hi - lo <= xtol * hi:
            break
        mid = 0.5 * (lo + hi)
        if overlap_c(mid, D) > target_C:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def geometric_schedule(sigma1: float, sigmaL: float, L: int, D: int, target_C: float | None = None) -> NoiseSchedule:
    """Geometric schedule with ``L`` scales hitting both endpoints exactly."""
    if not sigma1 > sigmaL > 0:
        raise InvalidInputError(f"need sigma1 > sigmaL > 0, got sigma1={sigma1}, sigmaL={sigmaL}")
    if L < 2:
        raise InvalidInputError(f"L must be at least 2, got {L}")
    sigmas = np.geomspace(sigma1, sigmaL, int(L))
    sigmas[0], sigmas[-1] = sigma1, sigmaL
    gamma = (sigma1 / sigmaL) ** (1.0 / (L - 1))
    return NoiseSchedule(sigmas=sigmas, gamma=gamma, D=D, target_C=target_C)


def n_scales(sigma1: float, sigmaL: float, gamma: float) -> int:
    """Number of scales for a ratio: ``1 + ln(sigma1/sigmaL)/ln(gamma)``, rounded half-up, at least 2."""
    raw = 1.0 + math.log(sigma1 / sigmaL) / math.log(gamma)
    return max(2, int(math.floor(raw + 0.5)))


def build_schedule(sigma1: float, sigmaL: float, D: int, target_C: float = DEFAULT_TARGET_C) -> NoiseSchedule:
    if not sigma1 > sigmaL > 0:
        raise InvalidInputError(f"need sigma1 > sigmaL > 0, got sigma1={sigma1}, sigmaL={sigmaL}")
    gamma_star = solve_gamma(D, target_C)
    L = n_scales(sigma1, sigmaL, gamma_star)
    return geometric_schedule(sigma1, sigmaL, L, D, target_C=target_C)


# -- step-size parameter --------------------------------------------------------


def langevin_variance_ratio(gamma: float, epsilon: float, sigmaL: float, T: int) -> float:
    """Closed-form ``s_T^2 / sigma_i^2`` after ``T`` Langevin steps at one scale.

    Chains start from ``N(0, sigma_{i-1}^2 I)`` and target ``N(0, sigma_i^2 I)``
    with step ``alpha = eps * sigma_i^2 / sigma_L^2``. The result does not
    depend on ``i`` or on the dimensionality.
    """
    s2 = sigmaL * sigmaL
    if not 0.0 < epsilon < s2:
        raise DivergentRegimeError(f"need 0 < epsilon < sigmaL^2 = {s2:g}, got epsilon={epsilon:g}")
    if T < 0:
        raise InvalidInputError(f"T must be non-negative, got {T}")
    u = epsilon / s2
    # 2 eps / (sigmaL^2 - sigmaL^2 (1-u)^2) simplified to avoid cancellation
    c = 2.0 / (2.0 - u)
    contraction = math.exp(2.0 * T * math.log1p(-u))
    return contraction * (gamma * gamma - c) + c


def default_epsilon_grid(sigmaL: float, n: int = 200) -> np.ndarray:
    s2 = sigmaL * sigmaL
    return np.geomspace(s2 * 1e-6, s2 * 0.5, n)


def solve_epsilon_for(gamma: float, sigmaL: float, T: int, grid=None) -> float:
    """Grid point minimising ``|ratio - 1|``; ties go to the smaller eps."""
    if T < 1:
        raise InvalidInputError(f"T must be at least 1, got {T}")
    grid = default_epsilon_grid(sigmaL) if grid is None else np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise InvalidInputError("epsilon grid is empty")
    s2 = sigmaL * sigmaL
    if np.any(grid <= 0) or np.any(grid >= s2):
        raise InvalidInputError(f"epsilon grid must lie inside (0, sigmaL^2 = {s2:g})")
    grid = np.sort(grid)
    gaps = np.array([abs(langevin_variance_ratio(gamma, e, sigmaL, T) - 1.0) for e in grid])
    return float(grid[int(np.argmin(gaps))])


def solve_epsilon(schedule: NoiseSchedule, T: int, grid=None, denoise: bool = True) -> LangevinConfig:
    eps = solve_epsilon_for(schedule.gamma, schedule.sigmaL, T, grid)
    return LangevinConfig(epsilon=eps, T=T, denoise=denoise)
