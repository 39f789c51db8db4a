"""Weighted finite-atom identities and the power-mean inequality family.

With positive atom weights gamma_t, the constrained infimum identity says

    inf { sum_t gamma_t * phi(u_t) : sum_t gamma_t * psi(u_t) <= r * sum_t gamma_t }
        = (inf of phi over {psi = r}) * sum_t gamma_t

whenever each phi + lambda*psi is coercive with a unique minimum across
the multiplier window and r sits inside the guaranteed level interval.
verify_eq82 checks the lower bound on a seeded cloud of feasible tuples
and exhibits the constant tuple achieving it; when the uniqueness
hypothesis fails the identity is downgraded to "not guaranteed" and any
violation found is reported as a finding, not an error.

jensen_check evaluates the reverse-Jensen bound

    sum_t gamma_t * f(u_t) <= f((sum_t gamma_t |u_t|^p / sum_t gamma_t)^(1/p)) * sum_t gamma_t

for the admissible function class, and log_inequality_check specializes it
to f(y) = log(1 + |y|^p). Whether coercivity is necessary for the identity
is unknown; reports carry that flag and never assert either way.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf
from typing import Optional, Sequence, Union

import numpy as np

from .core import ScalarField
from .errors import GridError, NonUniqueMinimumError, RangeError
from .multiplier_path import (
    MultiplierProblem,
    alpha_beta,
    constrained_band_minimum,
    solve_constrained,
)


@dataclass(frozen=True)
class WeightedSpace:
    """Positive atom weights plus the exponent of the power mean."""

    weights: tuple
    p: float = 1.0

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not w:
            raise GridError("need at least one atom")
        if any(v <= 0 for v in w):
            raise GridError("atom weights must be strictly positive")
        if not self.p > 0:
            raise GridError("the exponent p must be positive")
        object.__setattr__(self, "weights", w)

    @property
    def total(self) -> float:
        return float(sum(self.weights))

    def array(self) -> np.ndarray:
        return np.asarray(self.weights)


@dataclass(frozen=True)
class Eq82Report:
    passed: bool
    hypothesis_ok: bool
    rhs: float
    constrained_inf: float
    worst_value: float
    worst_tuple: list
    achieving_tuple: list
    achieving_value: float
    n_samples: int
    n_feasible: int
    n_projected: int
    seed: int
    alpha: float
    beta: float
    r: float
    notes: list
    coercivity_assumed: bool = True

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "hypothesis_ok": self.hypothesis_ok,
            "rhs": self.rhs,
            "constrained_inf": self.constrained_inf,
            "worst_value": self.worst_value,
            "worst_tuple": self.worst_tuple,
            "achieving_tuple": self.achieving_tuple,
            "achieving_value": self.achieving_value,
            "n_samples": self.n_samples,
            "n_feasible": self.n_feasible,
            "n_projected": self.n_projected,
            "seed": self.seed,
            "alpha": self.alpha,
            "beta": self.beta,
            "r": self.r,
            "notes": self.notes,
            "coercivity_assumed": self.coercivity_assumed,
        }


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    lhs: float
    rhs: float

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {"passed": self.passed, "lhs": self.lhs, "rhs": self.rhs}


def _eval_field(field: ScalarField, u: np.ndarray) -> np.ndarray:
    """Field values on a (samples, atoms) matrix of scalar arguments."""
    flat = u.reshape(-1)
    if field.supports_offgrid:
        vals = field.eval_at(flat[:, None])
    else:
        pts = field.domain.points()[:, 0]
        idx = np.clip(np.searchsorted(pts, flat), 0, pts.size - 1)
        idx_lo = np.clip(idx - 1, 0, pts.size - 1)
        nearer = np.abs(pts[idx_lo] - flat) < np.abs(pts[idx] - flat)
        idx = np.where(nearer, idx_lo, idx)
        vals = field.values[idx]
    return vals.reshape(u.shape)


def verify_eq82(
    phi: ScalarField,
    psi: ScalarField,
    w: WeightedSpace,
    r: float,
    samples: int = 10_000,
    seed: int = 0,
    a: float = 0.0,
    b: float = inf,
    band: Optional[float] = None,
    tol: Optional[float] = None,
) -> Eq82Report:
    """Check the weighted constrained-infimum identity on sampled tuples.

    One-dimensional atom values are drawn uniformly on the field box,
    rejected or radially projected onto the feasible set, and their
    weighted phi-sums compared against the constant-tuple bound. The
    violation path (when the unique-minimum hypothesis fails) reports a
    finding instead of raising.
    """
    if phi.domain != psi.domain:
        raise GridError("phi and psi must share one domain")
    if phi.domain.dim != 1:
        raise GridError("atom sampling is implemented for 1-d value grids")
    problem = MultiplierProblem(J=phi, Phi=psi, a=a, b=b)
    ab = alpha_beta(problem)
    if not (ab.alpha < r < ab.beta):
        raise RangeError(f"r={r} outside ]{ab.alpha}, {ab.beta}[")
    notes: list[str] = []
    hypothesis_ok = True
    try:
        solve_constrained(problem, r, band=band)
    except NonUniqueMinimumError as err:
        hypothesis_ok = False
        notes.append(
            f"unique-minimum hypothesis fails ({err}); identity not guaranteed"
        )
    m_r, x_r, _ = constrained_band_minimum(problem, r, band)
    rhs = m_r * w.total
    gamma = w.array()
    t = gamma.size
    rng = np.random.default_rng(seed)
    lo = phi.domain.lo[0]
    hi = phi.domain.hi[0]
    u = rng.uniform(lo, hi, size=(samples, t))
    psi_u = _eval_field(psi, u)
    budget = r * w.total
    feasible = psi_u @ gamma <= budget + 1e-12 * (1.0 + abs(budget))
    n_projected = 0
    if feasible.mean() < 0.01:
        # radial projection toward the feasible constant tuple
        c = float(phi.domain.points()[int(np.argmin(psi.values)), 0])
        scale_lo = np.zeros(samples)
        scale_hi = np.ones(samples)
        for _ in range(60):
            mid = 0.5 * (scale_lo + scale_hi)
            trial = c + mid[:, None] * (u - c)
            ok = _eval_field(psi, trial) @ gamma <= budget
            scale_lo = np.where(ok, mid, scale_lo)
            scale_hi = np.where(ok, scale_hi, mid)
        u = c + scale_lo[:, None] * (u - c)
        psi_u = _eval_field(psi, u)
        feasible = psi_u @ gamma <= budget + 1e-9 * (1.0 + abs(budget))
        n_projected = samples
    u = u[feasible]
    n_feasible = int(u.shape[0])
    # deterministic probes: the constant psi-minimizer and the achiever
    c = float(phi.domain.points()[int(np.argmin(psi.values)), 0])
    probes = [np.full(t, c)]
    achieving = np.full(t, float(x_r[0]))
    probes.append(achieving)
    stack = np.vstack([u] + [p[None, :] for p in probes])
    objective = _eval_field(phi, stack) @ gamma
    psi_stack = _eval_field(psi, stack) @ gamma
    valid = psi_stack <= budget + 1e-9 * (1.0 + abs(budget))
    objective = objective[valid]
    stack = stack[valid]
    worst_idx = int(np.argmin(objective))
    worst_value = float(objective[worst_idx])
    if tol is None:
        tol = 1e-9 * (1.0 + abs(rhs))
    passed = worst_value >= rhs - tol
    if not passed:
        notes.append(
            f"feasible tuple beats the constant bound by {rhs - worst_value}"
        )
    achieving_value = float(_eval_field(phi, achieving[None, :])[0] @ gamma)
    return Eq82Report(
        passed=passed,
        hypothesis_ok=hypothesis_ok,
        rhs=rhs,
        constrained_inf=m_r,
        worst_value=worst_value,
        worst_tuple=stack[worst_idx].tolist(),
        achieving_tuple=achieving.tolist(),
        achieving_value=achieving_value,
        n_samples=samples,
        n_feasible=n_feasible,
        n_projected=n_projected,
        seed=seed,
        alpha=ab.alpha,
        beta=ab.beta,
        r=r,
        notes=notes,
    )


def jensen_check(
    f: Union[ScalarField, callable],
    p: float,
    w: WeightedSpace,
    u: Sequence[float],
    tol: Optional[float] = None,
) -> CheckResult:
    """Weighted f-average against f at the weighted p-mean.

    The caller vouches for f's admissibility (positive and differentiable
    on the open half-line with an injective normalized derivative); the
    check just evaluates both sides.
    """
    if not p > 0:
        raise GridError("p must be positive")
    gamma = w.array()
    uu = np.asarray(list(u), dtype=float)
    if uu.shape != gamma.shape:
        raise GridError("u must supply one value per atom")

    if isinstance(f, ScalarField):
        def feval(vals):
            return f.eval_at(np.asarray(vals, dtype=float)[:, None])
    else:
        def feval(vals):
            return np.asarray(f(np.asarray(vals, dtype=float)), dtype=float)

    total = w.total
    lhs = float(feval(uu) @ gamma)
    mean_p = float((np.abs(uu) ** p) @ gamma / total)
    rhs = float(feval(np.array([mean_p ** (1.0 / p)]))[0]) * total
    if tol is None:
        tol = 1e-12 * (1.0 + abs(rhs))
    return CheckResult(passed=lhs <= rhs + tol, lhs=lhs, rhs=rhs)


def log_inequality_check(
    p: float,
    w: WeightedSpace,
    u: Sequence[float],
    tol: Optional[float] = None,
) -> CheckResult:
    """The log(1 + |u|^p) specialization of the power-mean bound."""
    if not p > 0:
        raise GridError("p must be positive")
    gamma = w.array()
    uu = np.asarray(list(u), dtype=float)
    if uu.shape != gamma.shape:
        raise GridError("u must supply one value per atom")
    total = w.total
    lhs = float(np.log1p(np.abs(uu) ** p) @ gamma)
    rhs = float(np.log1p((np.abs(uu) ** p) @ gamma / total)) * total
    if tol is None:
        tol = 1e-12 * (1.0 + abs(rhs))
    return CheckResult(passed=lhs <= rhs + tol, lhs=lhs, rhs=rhs)
