"""Iterated extrema on product grids and the two-minima alternative.

For a tabulated f(x, y) the two iterated values

    sup_inf = max over y of (min over x of f)
    inf_sup = min over x of (max over y of f)

always satisfy sup_inf <= inf_sup. When the gap is positive, either some
y-slice has two global minimizers in x, or a hypothesis on the y-slices
(continuity or quasi-concavity) fails; classify_alternative reports which
branch fired, with a concrete witness for the failure case.

The module also evaluates sup-inf over the probability simplex through
the recursive reparametrization

    psi(s, mu) = (mu*s_1, ..., mu*s_{k}, 1 - mu)

which reduces S_{k+1} to S_k x [0,1], and over filtering covers of the
y-grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import BivariateField, GridSpec, MinimaCluster, cluster_minima
from .errors import CoverError, GridError
from . import core


# ---------------------------------------------------------------------------
# iterated values

def sup_inf(f: BivariateField) -> float:
    """max over y of the x-minimum, exact on the tabulated grid."""
    if f.table.size == 0:
        raise GridError("empty product grid")
    return float(f.table.min(axis=0).max())


def inf_sup(f: BivariateField) -> float:
    """min over x of the y-maximum, exact on the tabulated grid."""
    if f.table.size == 0:
        raise GridError("empty product grid")
    return float(f.table.max(axis=1).min())


# ---------------------------------------------------------------------------
# alternative classification

@dataclass(frozen=True)
class GapClosed:
    kind: str = "gap_closed"

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class TwoMinima:
    y_hat: np.ndarray
    minima: MinimaCluster
    kind: str = "two_minima"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "y_hat": self.y_hat.tolist(),
            "minima": self.minima.to_dict(),
        }


@dataclass(frozen=True)
class Inconclusive:
    """Neither branch fired: carries the most suspicious hypothesis breach.

    `diagnostic` is either a quasi-concavity valley (x, y1 < y2 < y3 with
    the middle value below both sides) or, when no valley exists, the
    largest adjacent-sample jump on a y-line with the endpoint that breaks
    the local trend flagged as the suspected discontinuity.
    """

    diagnostic: dict
    kind: str = "inconclusive"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "diagnostic": self.diagnostic}


Alternative = Union[GapClosed, TwoMinima, Inconclusive]


@dataclass(frozen=True)
class MinimaxReport:
    sup_inf: float
    inf_sup: float
    gap: float
    alternative: Alternative
    gap_within_tol: bool
    tie_y: Optional[np.ndarray]

    def to_dict(self) -> dict:
        return {
            "sup_inf": self.sup_inf,
            "inf_sup": self.inf_sup,
            "gap": self.gap,
            "alternative": self.alternative.to_dict(),
            "gap_within_tol": self.gap_within_tol,
            "tie_y": None if self.tie_y is None else self.tie_y.tolist(),
        }


def _first_two_minima_slice(f, tol_val, tol_sep):
    xp = f.x_domain.points()
    if tol_sep is None:
        tol_sep = f.x_domain.default_tol_sep()
    for j in range(f.y_domain.size):
        cluster = cluster_minima(xp, f.table[:, j], tol_val=tol_val, tol_sep=tol_sep)
        if cluster.multiple:
            return j, cluster
    return None, None


def _valley_witness(f, tol_val):
    yp = f.y_domain.points()
    for i in range(f.x_domain.size):
        row = f.table[i]
        # prefix/suffix running maxima expose any j1 < j < j3 valley in O(n)
        left = np.maximum.accumulate(row)
        right = np.maximum.accumulate(row[::-1])[::-1]
        for j in range(1, row.size - 1):
            lo_side = left[j - 1]
            hi_side = right[j + 1]
            bar = min(lo_side, hi_side)
            if row[j] < bar - (tol_val if tol_val is not None else 0.0):
                j1 = int(np.argmax(row[:j]))
                j3 = j + 1 + int(np.argmax(row[j + 1:]))
                return {
                    "type": "quasiconcavity_violation",
                    "x": f.x_domain.points()[i].tolist(),
                    "y_triple": [yp[j1].tolist(), yp[j].tolist(), yp[j3].tolist()],
                    "values": [float(row[j1]), float(row[j]), float(row[j3])],
                }
    return None


def _jump_witness(f):
    best = (-np.inf, 0, 0)
    for i in range(f.x_domain.size):
        d = np.abs(np.diff(f.table[i]))
        if d.size == 0:
            continue
        j = int(np.argmax(d))
        if d[j] > best[0]:
            best = (float(d[j]), i, j)
    jump, i, j = best
    row = f.table[i]
    yp = f.y_domain.points()
    # score each endpoint of the jump pair by how far it sits from the
    # linear trend of the two samples beyond the pair on its far side
    def deviation(k, left_side):
        if left_side:
            if k + 2 >= row.size:
                return np.inf
            pred = 2 * row[k + 1] - row[k + 2]
        else:
            if k - 2 < 0:
                return np.inf
            pred = 2 * row[k - 1] - row[k - 2]
        return abs(row[k] - pred)

    dev_left = deviation(j, True)
    dev_right = deviation(j + 1, False)
    suspect = j if dev_left >= dev_right else j + 1
    return {
        "type": "jump_suspected",
        "x": f.x_domain.points()[i].tolist(),
        "y_pair": [yp[j].tolist(), yp[j + 1].tolist()],
        "y_suspect": yp[suspect].tolist(),
        "jump": jump,
    }


def classify_alternative(
    f: BivariateField,
    gap_tol: Optional[float] = None,
    tol_val: Optional[float] = None,
    tol_sep: Optional[float] = None,
) -> MinimaxReport:
    """Decide between a closed gap and a two-minima slice; else diagnose.

    The report carries both the gap flag and the first tie slice (when one
    exists) so borderline cases where both nearly hold stay visible.
    """
    lo = sup_inf(f)
    hi = inf_sup(f)
    gap = hi - lo
    if gap_tol is None:
        gap_tol = 1e-7 * (1.0 + abs(hi))
    j, cluster = _first_two_minima_slice(f, tol_val, tol_sep)
    tie_y = None if j is None else f.y_domain.points()[j]
    gap_ok = abs(gap) <= gap_tol
    if gap_ok:
        alt: Alternative = GapClosed()
    elif j is not None:
        alt = TwoMinima(y_hat=tie_y, minima=cluster)
    else:
        witness = _valley_witness(f, tol_val)
        if witness is None:
            witness = _jump_witness(f)
        alt = Inconclusive(diagnostic=witness)
    return MinimaxReport(
        sup_inf=lo,
        inf_sup=hi,
        gap=gap,
        alternative=alt,
        gap_within_tol=gap_ok,
        tie_y=tie_y,
    )


# ---------------------------------------------------------------------------
# simplex recursion

@dataclass(frozen=True)
class SimplexPoint:
    """A point of S_n: non-negative coordinates summing to one."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise GridError("simplex point needs a non-empty 1-d coordinate vector")
        if np.any(c < -1e-12):
            raise GridError("simplex coordinates must be non-negative")
        if abs(float(c.sum()) - 1.0) > 1e-12:
            raise GridError("simplex coordinates must sum to one")
        c.flags.writeable = False
        object.__setattr__(self, "coords", c)


def _recursion_batches(n: int, m: int, chunk: int):
    """Yield lambda batches covering the psi-recursion grid of S_n.

    Level mus live on linspace(0, 1, m); a point with mu-tuple
    (mu_1, ..., mu_{n-1}) is

        lambda_1 = prod(mu_i),  lambda_j = (1 - mu_{j-1}) * prod_{i>=j}(mu_i)

    which is exactly the image of the nested reparametrization.
    """
    if n == 1:
        yield np.ones((1, 1))
        return
    mu_grid = np.linspace(0.0, 1.0, m)
    levels = n - 1
    total = m ** levels
    start = 0
    while start < total:
        stop = min(start + chunk, total)
        flat = np.arange(start, stop)
        mus = np.empty((stop - start, levels))
        rem = flat
        for j in range(levels - 1, -1, -1):
            rem, idx = np.divmod(rem, m)
            mus[:, j] = mu_grid[idx]
        lam = np.empty((stop - start, n))
        suffix = np.ones(stop - start)
        lam[:, n - 1] = 1.0 - mus[:, levels - 1]
        for j in range(n - 2, 0, -1):
            suffix = suffix * mus[:, j]
            lam[:, j] = (1.0 - mus[:, j - 1]) * suffix
        lam[:, 0] = suffix * mus[:, 0]
        yield lam
        start = stop


def _call_on_batch(f: Callable, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(x, lam), dtype=float)
        if out.shape == (lam.shape[0],):
            return out
    except (TypeError, ValueError, IndexError):
        pass
    return np.array([float(f(x, lam[i])) for i in range(lam.shape[0])])


def simplex_sup_inf(
    f: Callable,
    X: Union[GridSpec, np.ndarray, Sequence],
    n: int,
    m: int,
    chunk: int = 1 << 21,
) -> float:
    """sup over S_n of inf over X of f via the nested mu-grid.

    `f(x, lam)` receives one X point (1-d array) and either a single
    simplex coordinate vector or a batch of shape (k, n); returning a
    (k,) array for batches makes large m feasible. The base case n=1
    is the single vertex; each extra level maximizes over its own
    linspace(0, 1, m) factor, so the work grows as m**(n-1) * |X|.
    """
    if n < 1:
        raise GridError("n must be at least 1")
    if m < 2 and n > 1:
        raise GridError("m must be at least 2")
    if isinstance(X, GridSpec):
        xpts = X.points()
    else:
        xpts = np.asarray(X, dtype=float)
        if xpts.ndim == 1:
            xpts = xpts[:, None]
    if xpts.shape[0] == 0:
        raise GridError("empty X grid")
    best = -np.inf
    for lam in _recursion_batches(n, m, chunk):
        acc = None
        for i in range(xpts.shape[0]):
            vals = _call_on_batch(f, xpts[i], lam)
            acc = vals if acc is None else np.minimum(acc, vals)
        best = max(best, float(acc.max()))
    return best


# ---------------------------------------------------------------------------
# filtering covers

def _as_masks(cover, ny: int) -> list[np.ndarray]:
    masks = []
    for member in cover:
        mask = np.zeros(ny, dtype=bool)
        idx = np.asarray(list(member), dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= ny):
            raise CoverError("cover member indexes outside the y-grid")
        mask[idx] = True
        masks.append(mask)
    return masks


def validate_filtering_cover(cover, ny: int) -> list[np.ndarray]:
    """Check that `cover` covers all y indices and is filtering."""
    if not cover:
        raise CoverError("empty cover")
    masks = _as_masks(cover, ny)
    union = np.zeros(ny, dtype=bool)
    for m in masks:
        union |= m
    if not union.all():
        missing = int(np.flatnonzero(~union)[0])
        raise CoverError(f"cover misses y index {missing}", offending=missing)
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            pair_union = masks[i] | masks[j]
            if not any(
                not np.any(pair_union & ~m) for m in masks
            ):
                raise CoverError(
                    f"cover is not filtering: no member contains the union of "
                    f"members {i} and {j}",
                    offending=(i, j),
                )
    return masks


def cover_sup_inf(f: BivariateField, cover: Sequence) -> float:
    """sup-inf computed member-by-member over a filtering cover.

    Equals sup_inf(f) exactly on finite grids; members are index subsets
    of the y-grid.
    """
    masks = validate_filtering_cover(cover, f.y_domain.size)
    colmins = f.table.min(axis=0)
    return float(max(colmins[m].max() for m in masks))
