"""The improvement-ratio infimum theta and the strict gap it certifies.

Given J on an X-grid, a penalty phi vanishing only at y0, a displacement
map Psi(x, lambda) with Psi(x, lambda_x) = y0, theta is the infimum of

    (J(x) - J(u)) / phi(Psi(x, lambda_u))

over global minimizers u of J and points x whose anchor lambda_x differs
from lambda_u. Exceeding theta by any margin mu forces, on some member of
every weakly filtering cover, a strict gap between the sup-inf and the
inf-sup of J(x) - mu*phi(Psi(x, lambda)); conversely the reverse
inequality on a whole cover certifies theta >= mu.

Openness and injectivity of Psi(x, .) have no finite-sample meaning; they
are assumed hypotheses, and pairs whose penalty underflows the division
guard are skipped and counted rather than silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf
from typing import Callable, Optional, Sequence

import numpy as np

from .core import MinimaCluster, ScalarField, global_minima
from .errors import CoverError, GridError, NoWitnessError, PreconditionError

_DIVISION_GUARD = 1e-14


@dataclass(frozen=True, eq=False)
class ThetaProblem:
    """The (J, phi, Psi, lambda_map, y0) bundle.

    Psi maps a batch of X points (k, dX) and one multiplier vector (dL,)
    to penalty arguments (k, dY); lambda_map sends a batch of X points to
    their anchors (k, dL). phi must evaluate off-grid (expression or
    callable backed) because Psi values rarely land on phi's own grid.
    """

    J: ScalarField
    phi: ScalarField
    Psi: Callable
    lambda_map: Callable
    y0: np.ndarray
    tol_val: Optional[float] = None
    tol_sep: Optional[float] = None

    def __post_init__(self):
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))
        y0.flags.writeable = False
        object.__setattr__(self, "y0", y0)
        if not self.phi.supports_offgrid:
            raise GridError("phi must support off-grid evaluation")
        phi0 = float(self.phi.eval_at(y0[None, :])[0])
        scale = 1.0 + float(np.abs(self.phi.values).max())
        if abs(phi0) > 1e-9 * scale:
            raise GridError(f"phi(y0) = {phi0}, expected 0")
        # phi must be positive away from y0 on its own grid
        ypts = self.phi.domain.points()
        away = np.linalg.norm(ypts - y0[None, :], axis=1) > self.sep()
        if away.any() and float(self.phi.values[away].min()) <= 0.0:
            raise GridError("phi must be positive away from y0 on its grid")
        anchors = self.anchors()
        if anchors.ndim == 1:
            anchors = anchors[:, None]
        spread = anchors.max(axis=0) - anchors.min(axis=0)
        if float(np.max(spread)) <= self.sep():
            raise GridError("the anchor map x -> lambda_x must not be constant")
        # Psi(x, lambda_x) must hit y0 for every grid point
        xpts = self.J.domain.points()
        worst = 0.0
        for i in range(0, xpts.shape[0], 65536):
            chunk = xpts[i:i + 65536]
            lam_chunk = np.atleast_2d(self.lambda_map(chunk))
            for k in range(chunk.shape[0]):
                y = np.atleast_1d(np.asarray(
                    self.Psi(chunk[k:k + 1], lam_chunk[k]), dtype=float
                )).reshape(-1)
                worst = max(worst, float(np.linalg.norm(y - y0)))
            if i == 0 and xpts.shape[0] > 65536:
                break  # spot-check the first chunk on big grids
        if worst > 1e-7 * (1.0 + float(np.linalg.norm(y0))):
            raise GridError(
                f"Psi(x, lambda_x) strays from y0 by {worst}"
            )

    def sep(self) -> float:
        if self.tol_sep is not None:
            return self.tol_sep
        return self.J.domain.default_tol_sep()

    def anchors(self) -> np.ndarray:
        lam = np.asarray(self.lambda_map(self.J.domain.points()), dtype=float)
        return lam


@dataclass(frozen=True)
class ThetaResult:
    value: float
    argmin_pair: Optional[dict]
    skipped_pairs: int
    pair_count: int

    def to_dict(self) -> dict:
        return {
            "theta": self.value,
            "argmin_pair": self.argmin_pair,
            "skipped_pairs": self.skipped_pairs,
            "pair_count": self.pair_count,
        }


def _minima(J: ScalarField, tol_val, tol_sep) -> MinimaCluster:
    return global_minima(J, tol_val=tol_val, tol_sep=tol_sep)


def theta(p: ThetaProblem) -> ThetaResult:
    """Exact infimum of the improvement ratio over all grid pairs."""
    cluster = _minima(p.J, p.tol_val, p.tol_sep)
    xpts = p.J.domain.points()
    anchors = np.atleast_2d(p.anchors())
    if anchors.shape[0] != xpts.shape[0]:
        anchors = anchors.reshape(xpts.shape[0], -1)
    sep = p.sep()
    best = inf
    best_pair = None
    skipped = 0
    considered = 0
    for u, j_u in zip(cluster.points, cluster.point_values):
        lam_u = np.atleast_1d(
            np.asarray(p.lambda_map(u[None, :]), dtype=float)
        ).reshape(-1)
        y = np.asarray(p.Psi(xpts, lam_u), dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        pen = p.phi.eval_at(y)
        dist = np.linalg.norm(anchors - lam_u[None, :], axis=1)
        eligible = dist > sep
        guarded = eligible & (pen <= _DIVISION_GUARD)
        skipped += int(guarded.sum())
        valid = eligible & (pen > _DIVISION_GUARD)
        considered += int(valid.sum())
        if not valid.any():
            continue
        ratios = (p.J.values[valid] - j_u) / pen[valid]
        k = int(np.argmin(ratios))
        if float(ratios[k]) < best:
            best = float(ratios[k])
            idx = np.flatnonzero(valid)[k]
            best_pair = {
                "u": u.tolist(),
                "x": xpts[idx].tolist(),
                "ratio": best,
            }
    value = best if considered else inf
    return ThetaResult(
        value=value,
        argmin_pair=best_pair,
        skipped_pairs=skipped,
        pair_count=considered,
    )


def quadratic_problem(
    J: ScalarField,
    Phi_map: Optional[Callable] = None,
    phi_domain_halfwidth: Optional[float] = None,
) -> ThetaProblem:
    """The squared-norm instantiation: phi = ||.||^2, Psi = Phi(x) - lambda."""
    if Phi_map is None:
        def Phi_map(pts):
            return np.asarray(pts, dtype=float)

    probe = np.atleast_2d(Phi_map(J.domain.points()[:2]))
    d_y = probe.shape[1]
    all_phi = np.atleast_2d(Phi_map(J.domain.points()))
    halfwidth = phi_domain_halfwidth
    if halfwidth is None:
        halfwidth = 2.0 * float(np.abs(all_phi).max()) + 1.0
    from .core import GridSpec  # local import keeps module load light

    ydom = GridSpec.uniform([-halfwidth] * d_y, [halfwidth] * d_y,
                            [3 if d_y > 1 else 5] * d_y)

    def sq_norm(*cols):
        return sum(np.asarray(c) ** 2 for c in cols)

    phi = ScalarField.from_callable(sq_norm, ydom)

    def Psi(pts, lam):
        return np.atleast_2d(Phi_map(np.atleast_2d(pts))) - np.asarray(lam)[None, :]

    def lambda_map(pts):
        return np.atleast_2d(Phi_map(np.atleast_2d(pts)))

    return ThetaProblem(
        J=J,
        phi=phi,
        Psi=Psi,
        lambda_map=lambda_map,
        y0=np.zeros(d_y),
    )


def theta_quadratic(J: ScalarField, Phi_map: Optional[Callable] = None) -> ThetaResult:
    """theta for phi = ||.||^2 and Psi(x, lambda) = Phi(x) - lambda."""
    return theta(quadratic_problem(J, Phi_map))


# ---------------------------------------------------------------------------
# covers and the strict gap

def validate_weakly_filtering(cover: Sequence, npoints: int) -> list[np.ndarray]:
    """Every pair of grid points must share a member."""
    if not cover:
        raise CoverError("empty cover")
    masks = []
    for member in cover:
        mask = np.zeros(npoints, dtype=bool)
        idx = np.asarray(list(member), dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= npoints):
            raise CoverError("cover member indexes outside the X grid")
        mask[idx] = True
        masks.append(mask)
    membership = np.stack(masks, axis=1)  # (npoints, nmembers)
    if not membership.any(axis=1).all():
        missing = int(np.flatnonzero(~membership.any(axis=1))[0])
        raise CoverError(f"cover misses X index {missing}", offending=missing)
    if any(mask.all() for mask in masks):
        return masks
    mf = membership.astype(np.float32)
    chunk = max(1, int(2e7 / max(1, npoints)))
    for start in range(0, npoints, chunk):
        share = mf[start:start + chunk] @ mf.T
        if not np.all(share > 0.0):
            i_local, j = np.argwhere(share == 0.0)[0]
            raise CoverError(
                f"cover is not weakly filtering: X indices "
                f"{start + int(i_local)} and {int(j)} share no member",
                offending=(start + int(i_local), int(j)),
            )
    return masks


def _default_lambda_grid(anchors: np.ndarray, refinement: int = 257) -> np.ndarray:
    """Anchor values plus a uniform refinement of their hull (1-d case)."""
    if anchors.shape[1] != 1:
        centroid = anchors.mean(axis=0, keepdims=True)
        return np.unique(np.vstack([anchors, centroid]), axis=0)
    vals = np.unique(anchors[:, 0])
    grid = np.linspace(vals.min(), vals.max(), refinement)
    return np.unique(np.concatenate([vals, grid]))[:, None]


@dataclass(frozen=True)
class GapWitness:
    member_index: int
    lhs: float
    rhs: float
    u: np.ndarray
    x1: np.ndarray
    lambda_u: np.ndarray

    @property
    def gap(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {
            "member_index": self.member_index,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "u": self.u.tolist(),
            "x1": self.x1.tolist(),
            "lambda_u": self.lambda_u.tolist(),
        }


def _penalties_for(p: ThetaProblem, xpts: np.ndarray, lam: np.ndarray):
    y = np.asarray(p.Psi(xpts, lam), dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    return p.phi.eval_at(y)


def _sup_inf_on_member(p, mu, xpts, jvals, lambda_grid):
    best = -inf
    for lam in lambda_grid:
        pen = _penalties_for(p, xpts, np.atleast_1d(lam))
        best = max(best, float((jvals - mu * pen).min()))
    return best


def _inf_sup_on_member(p, mu, xpts, jvals, anchors):
    worst = inf
    for i in range(xpts.shape[0]):
        pen = _anchor_penalties(p, xpts[i], anchors)
        val = float(jvals[i] - mu * pen.min())
        worst = min(worst, val)
    return worst


def _anchor_penalties(p, x, anchors):
    """Penalties of one x against every anchor in the member."""
    ys = []
    for k in range(anchors.shape[0]):
        y = np.asarray(p.Psi(x[None, :], anchors[k]), dtype=float)
        ys.append(np.atleast_2d(y)[0])
    return p.phi.eval_at(np.asarray(ys))


def strict_gap_witness(
    p: ThetaProblem,
    mu: float,
    cover: Sequence,
    lambda_grid: Optional[np.ndarray] = None,
) -> GapWitness:
    """Exhibit a member where sup-inf falls strictly below inf-sup.

    Follows the constructive route: pick a minimizer u of J and a point x1
    improving on J(u) once the mu-weighted penalty anchored at lambda_u is
    subtracted, then evaluate both sides on the first member containing
    both points.
    """
    th = theta(p)
    if not mu > th.value:
        raise PreconditionError(
            f"mu={mu} must strictly exceed theta={th.value}"
        )
    xpts = p.J.domain.points()
    masks = validate_weakly_filtering(cover, xpts.shape[0])
    cluster = _minima(p.J, p.tol_val, p.tol_sep)
    pair = None
    for u, j_u in zip(cluster.points, cluster.point_values):
        lam_u = np.atleast_1d(
            np.asarray(p.lambda_map(u[None, :]), dtype=float)
        ).reshape(-1)
        pen = _penalties_for(p, xpts, lam_u)
        improving = np.flatnonzero(p.J.values - mu * pen < j_u)
        if improving.size:
            pair = (u, lam_u, improving[0])
            break
    if pair is None:
        raise NoWitnessError(
            "no improving point found; the anchor grid is too coarse to "
            "expose the gap"
        )
    u, lam_u, x1_idx = pair
    u_idx = int(np.argmin(np.linalg.norm(xpts - u[None, :], axis=1)))
    member_index = None
    for k, mask in enumerate(masks):
        if mask[u_idx] and mask[x1_idx]:
            member_index = k
            break
    if member_index is None:
        raise CoverError(
            "no cover member contains both witness points", offending=(u_idx, int(x1_idx))
        )
    mask = masks[member_index]
    member_pts = xpts[mask]
    member_j = p.J.values[mask]
    anchors = np.atleast_2d(p.anchors())[mask]
    if lambda_grid is None:
        lambda_grid = _default_lambda_grid(np.atleast_2d(p.anchors()))
    lhs = _sup_inf_on_member(p, mu, member_pts, member_j, lambda_grid)
    rhs = _inf_sup_on_member(p, mu, member_pts, member_j, anchors)
    if not lhs < rhs:
        raise NoWitnessError(
            f"lhs={lhs} did not fall below rhs={rhs}; the multiplier grid "
            "is too coarse to expose the gap"
        )
    return GapWitness(
        member_index=member_index,
        lhs=lhs,
        rhs=rhs,
        u=u,
        x1=xpts[x1_idx],
        lambda_u=lam_u,
    )


def check_theta_lower_bound(
    p: ThetaProblem,
    mu: float,
    cover: Sequence,
    lambda_grid: Optional[np.ndarray] = None,
) -> bool:
    """True when the reverse inequality holds on every cover member.

    A True outcome certifies theta >= mu; consistency against theta() is
    what the test suite checks.
    """
    xpts = p.J.domain.points()
    masks = validate_weakly_filtering(cover, xpts.shape[0])
    if lambda_grid is None:
        lambda_grid = _default_lambda_grid(np.atleast_2d(p.anchors()))
    all_anchors = np.atleast_2d(p.anchors())
    slack = 1e-12 * (1.0 + float(np.abs(p.J.values).max()))
    for mask in masks:
        member_pts = xpts[mask]
        member_j = p.J.values[mask]
        anchors = all_anchors[mask]
        lhs = _sup_inf_on_member(p, mu, member_pts, member_j, lambda_grid)
        rhs = _inf_sup_on_member(p, mu, member_pts, member_j, anchors)
        if lhs < rhs - slack:
            return False
    return True
