"""Detectors for multiple global minima and their downstream consequences.

The detectors share one engine: scan a parameter, watch the global
minimizer of the parametrized objective, and when leadership jumps from
one branch to another, bisect the crossing to machine precision. At the
crossing the two branch values tie, which is precisely a two-point global
minima cluster.

check_b1 evaluates the slope condition that forces such a crossing to
exist for some positive multiplier; scan_rho_star scans sub-level
restrictions; farthest_tie_point searches the convex hull of a point set
for a hull point with tied farthest points; three_solutions_1d turns a
two-minima multiplier into three roots of a stationarity equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import inf
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import (
    MinimaCluster,
    ScalarField,
    cluster_minima,
    default_tol_val,
)
from .errors import (
    GridError,
    PreconditionError,
    RangeError,
    RootCountShortfallError,
)
from .strict_minimax import theta_quadratic


@dataclass(frozen=True)
class B1Context:
    kind: str = "b1"

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class RhoScanContext:
    rho_star: float
    kind: str = "rho_scan"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rho_star": self.rho_star}


@dataclass(frozen=True)
class ThreeSolutionsContext:
    y_mu: float
    roots: tuple
    kind: str = "three_solutions"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "y_mu": self.y_mu, "roots": list(self.roots)}


Context = Union[B1Context, RhoScanContext, ThreeSolutionsContext]


@dataclass(frozen=True)
class MultiplicityFinding:
    lambda_star: Optional[float]
    minima: Optional[MinimaCluster]
    context: Context

    @property
    def found(self) -> bool:
        return self.minima is not None and self.minima.multiple

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "minima": None if self.minima is None else self.minima.to_dict(),
            "context": self.context.to_dict(),
            "found": self.found,
        }


# ---------------------------------------------------------------------------
# slope condition

def check_b1(
    J: ScalarField,
    Phi: ScalarField,
    rho: float,
    u1,
    u2,
) -> bool:
    """Evaluate the two-slope inequality against the sub-level infimum.

    Points u1, u2 are snapped to the grid; the ordering
    Phi(u1) < rho < Phi(u2) is a hard precondition.
    """
    if J.domain != Phi.domain:
        raise GridError("J and Phi must share one domain")
    pts = J.domain.points()

    def snap(u):
        q = np.atleast_1d(np.asarray(u, dtype=float))
        return int(np.argmin(np.linalg.norm(pts - q[None, :], axis=1)))

    i1, i2 = snap(u1), snap(u2)
    phi1, phi2 = float(Phi.values[i1]), float(Phi.values[i2])
    if not (phi1 < rho < phi2):
        raise PreconditionError(
            f"need Phi(u1) < rho < Phi(u2), got {phi1}, {rho}, {phi2}"
        )
    mask = Phi.values <= rho
    m_rho = float(J.values[mask].min())
    lhs = (float(J.values[i1]) - m_rho) / (rho - phi1)
    rhs = (float(J.values[i2]) - m_rho) / (rho - phi2)
    return lhs < rhs


def penalized_minimax_sides(
    J: ScalarField,
    Phi: ScalarField,
    rho: float,
    lambda_grid: Sequence[float],
) -> tuple[float, float]:
    """Both iterated values of J + lambda*(Phi - rho) over a multiplier grid."""
    shifted = Phi.values - rho
    lo = -inf
    for lam in lambda_grid:
        lo = max(lo, float((J.values + lam * shifted).min()))
    lams = np.asarray(list(lambda_grid), dtype=float)
    sup_per_x = J.values + np.where(
        shifted >= 0, shifted * lams.max(), shifted * lams.min()
    )
    hi = float(sup_per_x.min())
    return lo, hi


# ---------------------------------------------------------------------------
# crossing engine

def _masked_cluster(points, values, mask, tol_val, tol_sep):
    if mask is None:
        return cluster_minima(points, values, tol_val=tol_val, tol_sep=tol_sep)
    return cluster_minima(points[mask], values[mask], tol_val=tol_val,
                          tol_sep=tol_sep)


def _masked_argmin(values, mask):
    if mask is None:
        return int(np.argmin(values))
    idx = np.flatnonzero(mask)
    return int(idx[np.argmin(values[idx])])


def _crossing_search(
    points: np.ndarray,
    value_fn: Callable[[float], np.ndarray],
    param_grid: Sequence[float],
    tol_val: Optional[float],
    tol_sep: float,
    mask_fn: Optional[Callable[[float], np.ndarray]] = None,
    all_events: bool = False,
):
    """Scan, then bisect leadership exchanges between minimizer branches.

    Returns a list of (param_star, cluster) events (empty when the
    minimizer never moves by tol_sep and no scan point shows a tie).
    """
    events = []
    prev_param = None
    prev_idx = None
    for param in param_grid:
        param = float(param)
        values = value_fn(param)
        mask = None if mask_fn is None else mask_fn(param)
        cluster = _masked_cluster(points, values, mask, tol_val, tol_sep)
        if cluster.multiple:
            events.append((param, cluster))
            if not all_events:
                return events
            prev_param, prev_idx = param, None
            continue
        idx = _masked_argmin(values, mask)
        if prev_idx is not None:
            jump = float(np.linalg.norm(points[idx] - points[prev_idx]))
            if jump >= tol_sep:
                event = _bisect_crossing(
                    points, value_fn, mask_fn, prev_param, param,
                    prev_idx, idx, tol_val, tol_sep,
                )
                events.append(event)
                if not all_events:
                    return events
        prev_param, prev_idx = param, idx
    return events


def _bisect_crossing(points, value_fn, mask_fn, p_lo, p_hi, idx_lo, idx_hi,
                     tol_val, tol_sep):
    old_pt = points[idx_lo]
    new_pt = points[idx_hi]
    lo, hi = p_lo, p_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        values = value_fn(mid)
        mask = None if mask_fn is None else mask_fn(mid)
        idx = _masked_argmin(values, mask)
        p = points[idx]
        if np.linalg.norm(p - old_pt) <= np.linalg.norm(p - new_pt):
            lo = mid
        else:
            hi = mid
    # report at the first parameter where the new branch leads, so both
    # branch points are feasible and their values tie to rounding
    param_star = hi
    values = value_fn(param_star)
    mask = None if mask_fn is None else mask_fn(param_star)
    tie = abs(float(values[idx_lo] - values[idx_hi]))
    widened = max(
        tol_val if tol_val is not None else default_tol_val(float(values.min())),
        4.0 * tie,
    )
    cluster = _masked_cluster(points, values, mask, widened, tol_sep)
    return param_star, cluster


def find_lambda_star(
    J: ScalarField,
    Phi: ScalarField,
    lambda_scan: Sequence[float],
    tol_val: Optional[float] = None,
    tol_sep: Optional[float] = None,
) -> MultiplicityFinding:
    """First positive multiplier whose sum J + lambda*Phi ties two branches."""
    if J.domain != Phi.domain:
        raise GridError("J and Phi must share one domain")
    if tol_sep is None:
        tol_sep = J.domain.default_tol_sep()
    points = J.domain.points()
    events = _crossing_search(
        points,
        lambda lam: J.values + lam * Phi.values,
        lambda_scan,
        tol_val,
        tol_sep,
    )
    if not events:
        return MultiplicityFinding(lambda_star=None, minima=None,
                                   context=B1Context())
    lam, cluster = events[0]
    return MultiplicityFinding(lambda_star=lam, minima=cluster,
                               context=B1Context())


def scan_rho_star(
    F: ScalarField,
    Phi: ScalarField,
    rho_grid: Sequence[float],
    tol_val: Optional[float] = None,
    tol_sep: Optional[float] = None,
    all_events: bool = False,
):
    """Smallest sub-level radius at which F + Phi ties two minima.

    With all_events=True every leadership exchange along the scan is
    returned, not just the first.
    """
    if F.domain != Phi.domain:
        raise GridError("F and Phi must share one domain")
    if tol_sep is None:
        tol_sep = F.domain.default_tol_sep()
    points = F.domain.points()
    total = F.values + Phi.values

    def masked(rho):
        return Phi.values <= rho

    events = _crossing_search(
        points,
        lambda rho: total,
        rho_grid,
        tol_val,
        tol_sep,
        mask_fn=masked,
        all_events=all_events,
    )
    findings = [
        MultiplicityFinding(lambda_star=None, minima=cluster,
                            context=RhoScanContext(rho_star=rho))
        for rho, cluster in events
    ]
    if all_events:
        return findings
    if not findings:
        return MultiplicityFinding(
            lambda_star=None, minima=None,
            context=RhoScanContext(rho_star=float("nan")),
        )
    return findings[0]


# ---------------------------------------------------------------------------
# farthest-point ties on the convex hull

@dataclass(frozen=True)
class FarthestTieResult:
    point: np.ndarray
    tied_points: np.ndarray
    distance: float
    tie_gap: float

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "tied_points": self.tied_points.tolist(),
            "distance": self.distance,
            "tie_gap": self.tie_gap,
        }


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def farthest_tie_point(
    points,
    hull_grid_n: int = 120,
    tie_tol: Optional[float] = None,
) -> FarthestTieResult:
    """Hull point whose farthest generators tie, found on a barycentric grid.

    Maximizes (second-farthest minus farthest) distance, which is zero
    exactly at a tie; the returned tie set always has at least two points
    at a resolution-dependent tolerance.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    pts = np.unique(pts, axis=0)
    k = pts.shape[0]
    if k < 2:
        raise PreconditionError("need at least 2 distinct points")
    n_weights = sum(1 for _ in _compositions(hull_grid_n, k))
    if n_weights > 2_000_000:
        raise PreconditionError(
            f"{n_weights} barycentric samples is too many; lower hull_grid_n"
        )
    weights = np.array(list(_compositions(hull_grid_n, k)), dtype=float)
    weights /= float(hull_grid_n)
    cand = weights @ pts
    diff = cand[:, None, :] - pts[None, :, :]
    dists = np.linalg.norm(diff, axis=2)
    part = np.sort(dists, axis=1)
    d1 = part[:, -1]
    d2 = part[:, -2]
    quality = d2 - d1
    best = int(np.argmax(quality))
    gap = float(d1[best] - d2[best])
    if tie_tol is None:
        tie_tol = gap + 64.0 * np.finfo(float).eps * (1.0 + float(d1[best]))
    tied = pts[dists[best] >= d1[best] - tie_tol]
    return FarthestTieResult(
        point=cand[best],
        tied_points=tied,
        distance=float(d1[best]),
        tie_gap=gap,
    )


# ---------------------------------------------------------------------------
# three solutions in one dimension

def three_solutions_1d(
    J: ScalarField,
    mu: float,
    lambda_scan: Optional[Sequence[float]] = None,
    shell_fraction: float = 0.9,
    dead_band: float = 1e-12,
    tol_val: Optional[float] = None,
    tol_sep: Optional[float] = None,
) -> MultiplicityFinding:
    """Find a right-hand side making the stationarity equation 3-rooted.

    Scans the quadratic-shift family J(x) - (mu/2)(x - lambda)^2 for a
    two-minima multiplier lambda*, then counts sign changes of the
    central-difference stationarity residual J'(x) - mu*x - y with
    y = -mu*lambda*. The admissible window for mu is ]2*theta, 2*eta[
    with eta estimated on the outer shell of the grid.
    """
    if J.domain.dim != 1:
        raise GridError("the three-solution finder is one-dimensional")
    x = J.domain.points()[:, 0]
    th = theta_quadratic(J).value
    rmax = float(np.abs(x).max())
    shell = np.abs(x) >= shell_fraction * rmax
    shell &= np.abs(x) > 0
    if not shell.any():
        raise GridError("the grid has no outer shell to estimate growth")
    eta = float((J.values[shell] / x[shell] ** 2).min())
    if not (2.0 * th < mu < 2.0 * eta):
        raise RangeError(
            f"mu={mu} outside the admissible window ]{2 * th}, {2 * eta}[ "
            f"(theta={th}, shell growth estimate eta={eta})"
        )
    if tol_sep is None:
        tol_sep = J.domain.default_tol_sep()
    if lambda_scan is None:
        lambda_scan = np.linspace(float(x.min()), float(x.max()), 201)
    points = J.domain.points()
    events = _crossing_search(
        points,
        lambda lam: J.values - 0.5 * mu * (x - lam) ** 2,
        lambda_scan,
        tol_val,
        tol_sep,
    )
    if not events:
        raise RootCountShortfallError(
            "no two-minima multiplier found along the scan; widen the scan "
            "or refine the grid",
        )
    lam_star, cluster = events[0]
    y_mu = -mu * lam_star
    h = J.domain.spacing()[0]
    dj = (J.values[2:] - J.values[:-2]) / (2.0 * h)
    xi = x[1:-1]
    f = dj - mu * xi - y_mu
    roots = []
    last_sign = 0
    last_idx = None
    for i, v in enumerate(f):
        if abs(v) <= dead_band:
            continue
        s = 1 if v > 0 else -1
        if last_sign and s != last_sign:
            x0, x1v = xi[last_idx], xi[i]
            f0, f1 = f[last_idx], f[i]
            roots.append(float(x0 - f0 * (x1v - x0) / (f1 - f0)))
        last_sign = s
        last_idx = i
    deduped = []
    for root in roots:
        if all(abs(root - q) >= tol_sep for q in deduped):
            deduped.append(root)
    if len(deduped) < 3:
        raise RootCountShortfallError(
            f"only {len(deduped)} sign-change roots located (grid too "
            f"coarse for y={y_mu})",
            roots=deduped,
            y_mu=y_mu,
        )
    return MultiplicityFinding(
        lambda_star=lam_star,
        minima=cluster,
        context=ThreeSolutionsContext(y_mu=y_mu, roots=tuple(deduped)),
    )
