"""Sampled domains, tabulated scalar fields, and tolerance-aware minima.

Everything downstream works on finite grids: a GridSpec fixes the sample
points, a ScalarField carries one finite value per point (optionally with
an off-grid evaluator when expression- or callable-backed), and
global_minima extracts the set of grid minimizers as a MinimaCluster,
merging points closer than a separation tolerance.

All containers are immutable after construction; arrays are marked
read-only so evaluators stay safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import inf, isinf
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EvaluationError, GridError
from .expr import Expression, parse_expr


def _as_tuple(value, dim: Optional[int] = None) -> tuple:
    if np.isscalar(value):
        seq = (float(value),)
    else:
        seq = tuple(float(v) for v in value)
    if dim is not None and len(seq) != dim:
        raise GridError(f"expected {dim} components, got {len(seq)}")
    return seq


@dataclass(frozen=True, eq=False)
class GridSpec:
    """A finite sampling of a box (uniform) or an explicit point list."""

    kind: str
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None
    n: Optional[tuple] = None
    explicit_points: Optional[np.ndarray] = None

    @classmethod
    def uniform(cls, lo, hi, n) -> "GridSpec":
        lo_t = _as_tuple(lo)
        hi_t = _as_tuple(hi, len(lo_t))
        if np.isscalar(n):
            n_t = tuple(int(n) for _ in lo_t)
        else:
            n_t = tuple(int(v) for v in n)
        if len(n_t) != len(lo_t):
            raise GridError("n must match the number of dimensions")
        for a, b in zip(lo_t, hi_t):
            if isinf(a) or isinf(b):
                raise GridError("uniform grids need finite bounds")
            if not a < b:
                raise GridError(f"lower bound {a} must be below upper bound {b}")
        for k in n_t:
            if k < 2:
                raise GridError("uniform grids need at least 2 points per axis")
        return cls(kind="uniform", lo=lo_t, hi=hi_t, n=n_t)

    @classmethod
    def explicit(cls, points, tol_sep: float = 1e-12) -> "GridSpec":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise GridError("explicit grids need a non-empty (k, d) point list")
        if not np.all(np.isfinite(pts)):
            raise GridError("explicit grid points must be finite")
        order = np.lexsort(pts.T[::-1])
        pts = pts[order]
        if pts.shape[0] > 1:
            gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            if np.any(gaps < tol_sep):
                raise GridError("explicit grid contains duplicate points")
        pts.flags.writeable = False
        return cls(kind="explicit", explicit_points=pts)

    # -- geometry ---------------------------------------------------------

    @property
    def dim(self) -> int:
        if self.kind == "uniform":
            return len(self.lo)
        return self.explicit_points.shape[1]

    @property
    def shape(self) -> tuple:
        if self.kind == "uniform":
            return self.n
        return (self.explicit_points.shape[0],)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list[np.ndarray]:
        if self.kind != "uniform":
            raise GridError("axes() is only defined for uniform grids")
        return [
            np.linspace(a, b, k)
            for a, b, k in zip(self.lo, self.hi, self.n)
        ]

    def points(self) -> np.ndarray:
        """All sample points, shape (size, dim), in lexicographic order."""
        if self.kind == "explicit":
            return self.explicit_points
        axes = self.axes()
        if len(axes) == 1:
            pts = axes[0][:, None]
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
        pts.flags.writeable = False
        return pts

    def spacing(self) -> Optional[tuple]:
        if self.kind != "uniform":
            return None
        return tuple((b - a) / (k - 1) for a, b, k in zip(self.lo, self.hi, self.n))

    def default_tol_sep(self) -> float:
        sp = self.spacing()
        if sp is not None:
            return 2.0 * max(sp)
        pts = self.explicit_points
        if pts.shape[0] < 2:
            return 1e-12
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        return 0.5 * float(gaps.min())

    # -- identity ----------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSpec):
            return NotImplemented
        if self.kind != other.kind:
            return False
        if self.kind == "uniform":
            return self.lo == other.lo and self.hi == other.hi and self.n == other.n
        return np.array_equal(self.explicit_points, other.explicit_points)

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {
                "kind": "uniform",
                "lo": list(self.lo),
                "hi": list(self.hi),
                "n": list(self.n),
            }
        return {"kind": "explicit", "points": self.explicit_points.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        if data.get("kind") == "uniform":
            return cls.uniform(data["lo"], data["hi"], data["n"])
        if data.get("kind") == "explicit":
            return cls.explicit(data["points"])
        raise GridError(f"unknown grid kind {data.get('kind')!r}")


def _columns(points: np.ndarray) -> list[np.ndarray]:
    return [points[:, j] for j in range(points.shape[1])]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A real-valued function tabulated on a grid.

    `values` is flat and aligned with `domain.points()`. When the field is
    backed by an expression or callable, `eval_at` evaluates off-grid points
    too; table-backed fields only know their samples.
    """

    domain: GridSpec
    values: np.ndarray
    off_grid: Optional[Callable] = None
    source: Optional[str] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.domain.size,):
            raise GridError(
                f"values shape {vals.shape} does not match grid size {self.domain.size}"
            )
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            point = self.domain.points()[bad]
            raise EvaluationError(
                f"non-finite value at grid point {point.tolist()}"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_expression(cls, text: str, domain: GridSpec) -> "ScalarField":
        fn = parse_expr(text, domain.dim)
        cols = _columns(domain.points())
        vals = np.broadcast_to(np.asarray(fn(*cols), dtype=float), (domain.size,))
        return cls(domain=domain, values=vals.copy(), off_grid=fn, source=text)

    @classmethod
    def from_callable(cls, fn: Callable, domain: GridSpec) -> "ScalarField":
        """Build from a vectorized callable taking one array per coordinate."""
        cols = _columns(domain.points())
        vals = np.broadcast_to(np.asarray(fn(*cols), dtype=float), (domain.size,))
        return cls(domain=domain, values=vals.copy(), off_grid=fn)

    @classmethod
    def from_table(cls, domain: GridSpec, values) -> "ScalarField":
        return cls(domain=domain, values=np.asarray(values, dtype=float))

    # -- evaluation -----------------------------------------------------------

    @property
    def supports_offgrid(self) -> bool:
        return self.off_grid is not None

    def eval_at(self, points) -> np.ndarray:
        if self.off_grid is None:
            raise EvaluationError("table-backed field cannot evaluate off-grid")
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None] if self.domain.dim == 1 else pts[None, :]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.asarray(self.off_grid(*_columns(pts)), dtype=float)
        return np.broadcast_to(out, (pts.shape[0],))

    def eval_scalar(self, point) -> float:
        pt = np.atleast_1d(np.asarray(point, dtype=float))
        return float(self.eval_at(pt[None, :])[0])

    def min_value(self) -> float:
        return float(self.values.min())

    def to_dict(self) -> dict:
        out = {"domain": self.domain.to_dict(), "values": self.values.tolist()}
        if self.source is not None:
            out["expression"] = self.source
        return out


@dataclass(frozen=True, eq=False)
class BivariateField:
    """A function of (x, y) tabulated on the product of two grids.

    `table[i, j]` is the value at the i-th x point and j-th y point, both
    in the grids' lexicographic point order.
    """

    x_domain: GridSpec
    y_domain: GridSpec
    table: np.ndarray

    def __post_init__(self):
        tab = np.asarray(self.table, dtype=float)
        expected = (self.x_domain.size, self.y_domain.size)
        if tab.shape != expected:
            raise GridError(f"table shape {tab.shape} does not match {expected}")
        if not np.all(np.isfinite(tab)):
            raise EvaluationError("bivariate table contains non-finite values")
        tab.flags.writeable = False
        object.__setattr__(self, "table", tab)

    @classmethod
    def from_callable(cls, fn: Callable, x_domain: GridSpec, y_domain: GridSpec):
        """Build from fn(x_cols..., y_cols...), broadcast over a meshgrid."""
        xp = x_domain.points()
        yp = y_domain.points()
        xi, yi = np.meshgrid(
            np.arange(xp.shape[0]), np.arange(yp.shape[0]), indexing="ij"
        )
        args = _columns(xp[xi.ravel()]) + _columns(yp[yi.ravel()])
        vals = np.asarray(fn(*args), dtype=float).reshape(xp.shape[0], yp.shape[0])
        return cls(x_domain=x_domain, y_domain=y_domain, table=vals)

    @classmethod
    def from_table(cls, x_domain: GridSpec, y_domain: GridSpec, table):
        return cls(x_domain=x_domain, y_domain=y_domain,
                   table=np.asarray(table, dtype=float))


@dataclass(frozen=True, eq=False)
class MinimaCluster:
    """Representatives of the grid points achieving the minimum.

    `value` is the exact grid minimum; every representative's value lies
    within tol_val of it and distinct representatives are at least tol_sep
    apart. Representatives are ordered by (value, lexicographic point).
    """

    points: np.ndarray
    point_values: np.ndarray
    value: float
    tol_val: float
    tol_sep: float

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def multiple(self) -> bool:
        return self.size >= 2

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "point_values": self.point_values.tolist(),
            "value": self.value,
            "tol_val": self.tol_val,
            "tol_sep": self.tol_sep,
        }


def default_tol_val(vmin: float) -> float:
    return 1e-9 * (1.0 + abs(vmin))


def cluster_minima(
    points: np.ndarray,
    values: np.ndarray,
    tol_val: Optional[float] = None,
    tol_sep: float = 1e-9,
) -> MinimaCluster:
    """Cluster the near-minimal entries of (points, values).

    Candidates within tol_val of the minimum are scanned in (value, lex)
    order; a candidate opens a new cluster only when it sits at least
    tol_sep from every representative chosen so far, so the representative
    of each cluster is its least-value, lexicographically-first point.
    """
    if values.size == 0:
        raise GridError("cannot take minima over an empty grid")
    vmin = float(values.min())
    if tol_val is None:
        tol_val = default_tol_val(vmin)
    cand = np.flatnonzero(values <= vmin + tol_val)
    cand_pts = points[cand]
    cand_vals = values[cand]
    order = np.lexsort(tuple(cand_pts[:, j] for j in range(cand_pts.shape[1] - 1, -1, -1))
                       + (cand_vals,))
    reps: list[np.ndarray] = []
    rep_vals: list[float] = []
    rep_arr = np.empty((cand.size, points.shape[1]))
    count = 0
    for idx in order:
        p = cand_pts[idx]
        if count:
            d = np.linalg.norm(rep_arr[:count] - p[None, :], axis=1)
            if d.min() < tol_sep:
                continue
        rep_arr[count] = p
        reps.append(p)
        rep_vals.append(float(cand_vals[idx]))
        count += 1
    rep_points = np.array(reps)
    rep_points.flags.writeable = False
    rep_values = np.array(rep_vals)
    rep_values.flags.writeable = False
    return MinimaCluster(
        points=rep_points,
        point_values=rep_values,
        value=vmin,
        tol_val=float(tol_val),
        tol_sep=float(tol_sep),
    )


def global_minima(
    fld: ScalarField,
    tol_val: Optional[float] = None,
    tol_sep: Optional[float] = None,
    mask: Optional[np.ndarray] = None,
) -> MinimaCluster:
    """All grid minimizers of a field, merged at separation tol_sep.

    `mask` restricts the search to a boolean subset of the grid.
    """
    pts = fld.domain.points()
    vals = fld.values
    if mask is not None:
        keep = np.asarray(mask, dtype=bool)
        pts = pts[keep]
        vals = vals[keep]
    if tol_sep is None:
        tol_sep = fld.domain.default_tol_sep()
    return cluster_minima(pts, vals, tol_val=tol_val, tol_sep=tol_sep)


def golden_section_min(fn: Callable[[float], float], lo: float, hi: float,
                       iters: int = 90) -> float:
    """Deterministic golden-section minimizer on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
        if b - a <= 1e-15 * (1.0 + abs(a) + abs(b)):
            break
    return 0.5 * (a + b)
