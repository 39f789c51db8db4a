"""Constrained minimization through the multiplier path.

For J, Phi on a common grid and an interval ]a, b[ of multipliers, the path
lambda -> argmin(J + lambda * Phi) has a monotone footprint: g(lambda) =
Phi at the path point never increases. Levels r strictly between

    alpha = max(inf Phi, sup over M_b of Phi)
    beta  = min(sup Phi, inf over M_a of Phi)

are reachable by bisection on g, and the resulting multiplier certifies the
constrained minimum of J over {Phi = r}. M_a / M_b are the minima clusters
of J + a*Phi / J + b*Phi at finite endpoints and empty at infinite ones
(conventions inf of empty = +inf, sup of empty = -inf).

Infinities use IEEE inf directly; math.isinf is the tag that separates
them from data, and no finite sentinel stands in for them anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf, isfinite, isinf
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    MinimaCluster,
    ScalarField,
    cluster_minima,
    default_tol_val,
    global_minima,
)
from .errors import (
    Condition34Error,
    CrossCheckError,
    DomainError,
    GridError,
    MaxIterError,
    NoBracketError,
    NonUniqueMinimumError,
    RangeError,
    ResidualError,
)

_EXPANSION_FACTOR = 10.0
_MAX_EXPANSIONS = 60


@dataclass(frozen=True, eq=False)
class MultiplierProblem:
    """The (J, Phi, ]a,b[) bundle all path operations consume."""

    J: ScalarField
    Phi: ScalarField
    a: float = -inf
    b: float = inf
    tol_val: Optional[float] = None
    tol_sep: Optional[float] = None

    def __post_init__(self):
        if self.J.domain != self.Phi.domain:
            raise GridError("J and Phi must share one domain")
        if not self.a < self.b:
            raise GridError(f"need a < b, got a={self.a}, b={self.b}")

    def sep(self) -> float:
        if self.tol_sep is not None:
            return self.tol_sep
        return self.J.domain.default_tol_sep()


@dataclass(frozen=True)
class AlphaBeta:
    alpha: float
    beta: float
    M_a: Optional[MinimaCluster]
    M_b: Optional[MinimaCluster]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "M_a": None if self.M_a is None else self.M_a.to_dict(),
            "M_b": None if self.M_b is None else self.M_b.to_dict(),
        }


@dataclass(frozen=True)
class WellPosedCertificate:
    """One solved level: multiplier, minimizer, objective, and residual."""

    r: float
    lambda_hat: float
    x_hat: np.ndarray
    J_value: float
    phi_residual: float
    unique: bool

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "lambda_hat": self.lambda_hat,
            "x_hat": self.x_hat.tolist(),
            "J_value": self.J_value,
            "phi_residual": self.phi_residual,
            "unique": self.unique,
        }


@dataclass(frozen=True)
class PathMonotonicityReport:
    passed: bool
    lambdas: tuple
    g_values: tuple
    first_violation: Optional[dict]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "lambdas": list(self.lambdas),
            "g_values": list(self.g_values),
            "first_violation": self.first_violation,
        }


# ---------------------------------------------------------------------------
# inner minimization

def _combined(p: MultiplierProblem, lam: float) -> np.ndarray:
    return p.J.values + lam * p.Phi.values


def _argmin_state(p: MultiplierProblem, lam: float):
    vals = _combined(p, lam)
    idx = int(np.argmin(vals))
    return idx, float(vals[idx]), vals


def inner_minimize(p: MultiplierProblem, lam: float):
    """Unique global minimum of J + lam*Phi on the grid.

    Raises NonUniqueMinimumError when the minima cluster has two or more
    representatives, because every conclusion drawn from the path is
    conditional on uniqueness.
    """
    if not (p.a < lam < p.b):
        raise RangeError(f"multiplier {lam} outside ]{p.a}, {p.b}[")
    vals = _combined(p, lam)
    cluster = cluster_minima(
        p.J.domain.points(), vals, tol_val=p.tol_val, tol_sep=p.sep()
    )
    if cluster.multiple:
        raise NonUniqueMinimumError(
            f"J + {lam}*Phi has {cluster.size} global minima "
            f"(representatives {cluster.points.tolist()})",
            lam=lam,
            cluster=cluster,
        )
    return cluster.points[0], float(cluster.value)


def _endpoint_cluster(p: MultiplierProblem, lam: float) -> MinimaCluster:
    vals = _combined(p, lam)
    return cluster_minima(
        p.J.domain.points(), vals, tol_val=p.tol_val, tol_sep=p.sep()
    )


def alpha_beta(p: MultiplierProblem) -> AlphaBeta:
    """The guaranteed level interval ]alpha, beta[ with endpoint clusters."""
    phi = p.Phi.values
    inf_phi = float(phi.min())
    sup_phi = float(phi.max())
    M_a = _endpoint_cluster(p, p.a) if isfinite(p.a) else None
    M_b = _endpoint_cluster(p, p.b) if isfinite(p.b) else None

    def phi_at(cluster: MinimaCluster) -> np.ndarray:
        pts = p.Phi.domain.points()
        # representatives are grid points; match them back to grid indices
        idx = [_grid_index(pts, q) for q in cluster.points]
        return phi[idx]

    sup_Mb = float(phi_at(M_b).max()) if M_b is not None else -inf
    inf_Ma = float(phi_at(M_a).min()) if M_a is not None else inf
    alpha = max(inf_phi, sup_Mb)
    beta = min(sup_phi, inf_Ma)
    if alpha > beta + 1e-12 * (1.0 + abs(beta)):
        raise CrossCheckError(
            f"alpha={alpha} exceeds beta={beta}; endpoint clusters inconsistent"
        )
    return AlphaBeta(alpha=alpha, beta=beta, M_a=M_a, M_b=M_b)


def _grid_index(points: np.ndarray, q: np.ndarray) -> int:
    d = np.linalg.norm(points - q[None, :], axis=1)
    return int(np.argmin(d))


# ---------------------------------------------------------------------------
# bracketing and bisection on g

def _start_multiplier(a: float, b: float) -> float:
    if isfinite(a) and isfinite(b):
        return 0.5 * (a + b)
    if isfinite(a):
        return a + 1.0
    if isfinite(b):
        return b - 1.0
    return 1.0


def _probes_toward(endpoint: float, start: float, toward_a: bool):
    """Geometric probe schedule approaching one end of ]a, b[."""
    for k in range(1, _MAX_EXPANSIONS + 1):
        if isfinite(endpoint):
            yield endpoint + (start - endpoint) / (_EXPANSION_FACTOR ** k)
        else:
            step = _EXPANSION_FACTOR ** (k - 1)
            yield start - step if toward_a else start + step


class _PathCache:
    """Memoized g evaluations with the argmin index retained."""

    def __init__(self, p: MultiplierProblem):
        self.p = p
        self.points = p.J.domain.points()
        self.cache: dict[float, tuple[int, float]] = {}

    def state(self, lam: float) -> tuple[int, float]:
        hit = self.cache.get(lam)
        if hit is None:
            idx, _, _ = _argmin_state(self.p, lam)
            g = float(self.p.Phi.values[idx])
            hit = (idx, g)
            self.cache[lam] = hit
        return hit

    def g(self, lam: float) -> float:
        return self.state(lam)[1]

    def argmin_index(self, lam: float) -> int:
        return self.state(lam)[0]


def _check_unique(p: MultiplierProblem, lam: float) -> None:
    # raises NonUniqueMinimumError when the cluster is multiple
    inner_minimize(p, lam)


def _bracket(p: MultiplierProblem, r: float, cache: _PathCache):
    """Find lo < hi with g(lo) >= r >= g(hi); g never increases in lambda."""
    lam0 = _start_multiplier(p.a, p.b)
    _check_unique(p, lam0)
    if cache.g(lam0) >= r:
        lo, hi = lam0, None
        for lam in _probes_toward(p.b, lam0, toward_a=False):
            _check_unique(p, lam)
            if cache.g(lam) <= r:
                hi = lam
                break
            lo = lam
        if hi is None:
            raise NoBracketError(
                f"g never dropped to {r} while expanding toward b={p.b}; "
                "hypothesis unverified"
            )
    else:
        lo, hi = None, lam0
        for lam in _probes_toward(p.a, lam0, toward_a=True):
            _check_unique(p, lam)
            if cache.g(lam) >= r:
                lo = lam
                break
            hi = lam
        if lo is None:
            raise NoBracketError(
                f"g never reached {r} while expanding toward a={p.a}; "
                "hypothesis unverified"
            )
    return lo, hi


def _width_floor(lo: float, hi: float) -> float:
    return 4.0 * np.finfo(float).eps * max(1.0, abs(lo), abs(hi))


def _tie_multiplier(p: MultiplierProblem, i: int, j: int) -> Optional[float]:
    dphi = p.Phi.values[i] - p.Phi.values[j]
    if dphi == 0.0:
        return None
    return -(p.J.values[i] - p.J.values[j]) / dphi


def _window_edge(p, cache, lam_in, lam_out, idx_hat, iters=48):
    """Exact multiplier where the argmin hands over from idx_hat.

    Bisects the argmin-constancy predicate between an inside and an
    outside multiplier, then replaces the bisected edge by the closed-form
    tie value against the partner argmin found just outside.
    """
    if lam_out is None:
        return lam_in, None
    a, b = lam_in, lam_out
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        if cache.argmin_index(mid) == idx_hat:
            a = mid
        else:
            b = mid
    partner = cache.argmin_index(b)
    if partner == idx_hat:
        return a, None
    tie = _tie_multiplier(p, idx_hat, partner)
    if tie is None:
        return 0.5 * (a + b), partner
    lo, hi = min(a, b), max(a, b)
    span = hi - lo
    if tie < lo - span or tie > hi + span:
        return 0.5 * (a + b), partner
    return tie, partner


def _phi_band(p: MultiplierProblem, r: float, band: Optional[float]) -> float:
    """A never-empty level window around r at solver-tolerance width."""
    nearest = float(np.abs(p.Phi.values - r).min())
    floor = 16.0 * np.finfo(float).eps * (1.0 + abs(r))
    return max(band if band is not None else 0.0, floor, nearest)


def constrained_band_minimum(p: MultiplierProblem, r: float,
                             band: Optional[float] = None):
    """Direct grid minimum of J over {|Phi - r| <= band} with its point."""
    width = _phi_band(p, r, band)
    mask = np.abs(p.Phi.values - r) <= width
    vals = p.J.values[mask]
    pts = p.J.domain.points()[mask]
    k = int(np.argmin(vals))
    return float(vals[k]), pts[k], width


def solve_constrained(
    p: MultiplierProblem,
    r: float,
    bisect_tol: Optional[float] = None,
    max_iter: int = 200,
    band: Optional[float] = None,
    cross_tol_scale: float = 1e-6,
) -> WellPosedCertificate:
    """Minimize J over {Phi = r} by monotone bisection on the path.

    The reported multiplier is the midpoint of the interval over which the
    returned minimizer stays the argmin (edges located by closed-form tie
    multipliers), which converges quadratically in the grid spacing to the
    continuum multiplier. The certificate is cross-checked against the
    direct band-constrained grid minimum before being returned.
    """
    ab = alpha_beta(p)
    if not (ab.alpha < r < ab.beta):
        raise RangeError(
            f"r={r} outside the guaranteed interval ]{ab.alpha}, {ab.beta}["
        )
    if bisect_tol is None:
        bisect_tol = 1e-9 * (1.0 + abs(r))
    cache = _PathCache(p)
    lo, hi = _bracket(p, r, cache)
    lam_in = None
    iters = 0
    while lam_in is None:
        if iters >= max_iter:
            raise MaxIterError(
                f"no multiplier with |g-r| <= {bisect_tol} in {max_iter} "
                "bisection steps"
            )
        iters += 1
        mid = 0.5 * (lo + hi)
        gm = cache.g(mid)
        if abs(gm - r) <= bisect_tol:
            lam_in = mid
            break
        if hi - lo <= _width_floor(lo, hi):
            break
        if gm > r:
            lo = mid
        else:
            hi = mid
    if lam_in is None:
        # the path jumped across r; decide between a genuine branch tie
        # and plain grid quantization
        mid = 0.5 * (lo + hi)
        i_lo = cache.argmin_index(lo)
        i_hi = cache.argmin_index(hi)
        pts = p.J.domain.points()
        gap = np.linalg.norm(pts[i_lo] - pts[i_hi])
        if gap >= p.sep():
            vals = _combined(p, mid)
            tie = abs(float(vals[i_lo] - vals[i_hi]))
            cluster = cluster_minima(
                pts, vals,
                tol_val=max(default_tol_val(float(vals.min())), 4.0 * tie),
                tol_sep=p.sep(),
            )
            if cluster.multiple:
                raise NonUniqueMinimumError(
                    f"J + {mid}*Phi has a two-branch global-minimum tie; "
                    "the constrained problem is not well-posed at this level",
                    lam=mid,
                    cluster=cluster,
                )
        lam_in = lo if abs(cache.g(lo) - r) <= abs(cache.g(hi) - r) else hi
        residual = abs(cache.g(lam_in) - r)
        width = _phi_band(p, r, band)
        if residual > max(bisect_tol, 2.0 * width):
            raise ResidualError(
                f"bisection collapsed with residual {residual} beyond the "
                f"grid level resolution {width}"
            )
    idx_hat = cache.argmin_index(lam_in)
    _check_unique(p, lam_in)
    # outside references for the two plateau edges
    left_out = None
    right_out = None
    for lam, (idx, _) in cache.cache.items():
        if idx != idx_hat:
            if lam < lam_in and (left_out is None or lam > left_out):
                left_out = lam
            if lam > lam_in and (right_out is None or lam < right_out):
                right_out = lam
    lam_left, _ = _window_edge(p, cache, lam_in, left_out, idx_hat)
    lam_right, _ = _window_edge(p, cache, lam_in, right_out, idx_hat)
    lam_hat = 0.5 * (lam_left + lam_right)
    if not (p.a < lam_hat < p.b):
        lam_hat = lam_in
    x_hat = p.J.domain.points()[idx_hat]
    j_value = float(p.J.values[idx_hat])
    residual = abs(float(p.Phi.values[idx_hat]) - r)
    direct, _, width = constrained_band_minimum(p, r, band)
    slack = max(
        cross_tol_scale * (1.0 + abs(j_value)),
        1.01 * abs(lam_hat) * (residual + width),
    )
    if abs(direct - j_value) > slack:
        raise CrossCheckError(
            f"certificate J value {j_value} disagrees with the direct "
            f"band-constrained minimum {direct} (band {width})"
        )
    return WellPosedCertificate(
        r=r,
        lambda_hat=float(lam_hat),
        x_hat=x_hat,
        J_value=j_value,
        phi_residual=residual,
        unique=True,
    )


# ---------------------------------------------------------------------------
# path diagnostics

def path_monotonicity_check(
    p: MultiplierProblem,
    lambda_grid: Sequence[float],
    inner: Optional[Callable] = None,
    tol: Optional[float] = None,
) -> PathMonotonicityReport:
    """Verify that Phi along the path never increases across the grid.

    `inner` replaces the inner minimizer (returning a domain point) and
    exists so a deliberately wrong minimizer can be shown to break the
    monotonicity that the true one guarantees.
    """
    lams = [float(v) for v in lambda_grid]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise DomainError("lambda grid must be strictly increasing")
    g_vals = []
    for lam in lams:
        if inner is None:
            point, _ = inner_minimize(p, lam)
        else:
            point = np.atleast_1d(np.asarray(inner(p, lam), dtype=float))
        idx = _grid_index(p.Phi.domain.points(), point)
        g_vals.append(float(p.Phi.values[idx]))
    if tol is None:
        scale = max((abs(v) for v in g_vals), default=0.0)
        tol = 1e-9 * (1.0 + scale)
    violation = None
    for k in range(len(lams) - 1):
        if g_vals[k + 1] > g_vals[k] + tol:
            violation = {
                "lambda": lams[k],
                "mu": lams[k + 1],
                "g_lambda": g_vals[k],
                "g_mu": g_vals[k + 1],
            }
            break
    return PathMonotonicityReport(
        passed=violation is None,
        lambdas=tuple(lams),
        g_values=tuple(g_vals),
        first_violation=violation,
    )


def solve_dual(
    p: MultiplierProblem,
    r: float,
    bisect_tol: Optional[float] = None,
    max_iter: int = 200,
    band: Optional[float] = None,
) -> WellPosedCertificate:
    """Minimize Phi over {J = r} for a >= 0 via the reciprocal interval.

    Swapping the roles of J and Phi turns multipliers mu in ]1/b, 1/a[
    into the original ]a, b[ through Phi + mu*J = mu*(J + (1/mu)*Phi), so
    the primal engine applies unchanged. The certificate's J_value is the
    value of Phi (the dual objective) at the solution.
    """
    if p.a < 0:
        raise DomainError(f"dual form needs a >= 0, got a={p.a}")
    lo = 0.0 if isinf(p.b) else 1.0 / p.b
    hi = inf if p.a == 0 else 1.0 / p.a
    swapped = MultiplierProblem(
        J=p.Phi, Phi=p.J, a=lo, b=hi, tol_val=p.tol_val, tol_sep=p.tol_sep
    )
    return solve_constrained(
        swapped, r, bisect_tol=bisect_tol, max_iter=max_iter, band=band
    )


def limit_inf_phi(
    p: MultiplierProblem,
    lambda_seq: Optional[Sequence[float]] = None,
    richardson: bool = False,
    tol: Optional[float] = None,
) -> float:
    """Limit of Phi along the path as the multiplier vanishes from above.

    Requires a = 0. The empirical guard rejects runs whose last path value
    is not safely below sup Phi, because then the limit carries no
    information about the minima of J.
    """
    if p.a != 0:
        raise DomainError(f"limit computation needs a = 0, got a={p.a}")
    if lambda_seq is None:
        lambda_seq = [2.0 ** (-k) for k in range(0, 41)]
        lambda_seq = [lam for lam in lambda_seq if lam < p.b]
    lams = [float(v) for v in lambda_seq]
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise DomainError("lambda sequence must be strictly decreasing")
    if any(not (0.0 < lam < p.b) for lam in lams):
        raise RangeError("lambda sequence must lie inside ]0, b[")
    g_vals = []
    for lam in lams:
        point, _ = inner_minimize(p, lam)
        idx = _grid_index(p.Phi.domain.points(), point)
        g_vals.append(float(p.Phi.values[idx]))
    sup_phi = float(p.Phi.values.max())
    if tol is None:
        tol = 1e-6 * (1.0 + abs(sup_phi))
    if not g_vals[-1] < sup_phi - tol:
        raise Condition34Error(
            f"path value {g_vals[-1]} reached the upper bound {sup_phi}; "
            "the vanishing-multiplier limit is uninformative here"
        )
    if richardson and len(g_vals) >= 2:
        return g_vals[-1] + (g_vals[-1] - g_vals[-2])
    return g_vals[-1]
