"""Named builtin problems usable from configs and tests.

Each builtin is built lazily and returns a fresh dict of objects; grids
use power-of-two-friendly sample counts where exact representation of the
interesting points keeps comparisons sharp.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf
from typing import Callable

import numpy as np

from .core import BivariateField, GridSpec, ScalarField
from .errors import ConfigError
from .integral import WeightedSpace
from .multiplier_path import MultiplierProblem
from .spherical import SphericalProblem


@dataclass(frozen=True)
class Fixture:
    name: str
    kind: str
    make: Callable[[], dict]
    description: str


def _example_1_1() -> dict:
    xdom = GridSpec.explicit([[0.0], [1.0]])
    ydom = GridSpec.uniform(0.0, 1.0, 101)
    y = ydom.points()[:, 0]
    table = np.empty((2, y.size))
    table[0] = y
    table[1] = np.where(y > 0.0, -y, 1.0)
    return {"field": BivariateField.from_table(xdom, ydom, table)}


def _linear_quadratic() -> dict:
    dom = GridSpec.uniform(-10.0, 10.0, 200001)
    problem = MultiplierProblem(
        J=ScalarField.from_expression("x1", dom),
        Phi=ScalarField.from_expression("x1^2", dom),
        a=0.0,
        b=inf,
    )
    return {"problem": problem, "r": 1.0}


def _quartic_linear() -> dict:
    dom = GridSpec.uniform(-3.0, 3.0, 6145)
    problem = MultiplierProblem(
        J=ScalarField.from_expression("x1^4", dom),
        Phi=ScalarField.from_expression("x1", dom),
        a=-inf,
        b=inf,
    )
    return {"problem": problem, "r": 2.0}


def _double_well() -> dict:
    dom = GridSpec.uniform(-2.0, 2.0, 4097)
    return {"J": ScalarField.from_expression("(x1^2 - 1)^2", dom), "mu": 1.0}


def _pure_square() -> dict:
    dom = GridSpec.uniform(-1.0, 1.0, 2049)
    return {"J": ScalarField.from_expression("x1^2", dom), "mu": 1.5}


def _remark_5_1() -> dict:
    dom = GridSpec.uniform(-3.0, 3.0, 60001)
    return {
        "F": ScalarField.from_expression("-x1^3", dom),
        "Phi": ScalarField.from_expression("x1^2", dom),
        "rho_grid": np.linspace(0.25, 3.0, 56),
        "lambda_scan": np.linspace(0.05, 4.0, 80),
    }


def _remark_8_1() -> dict:
    dom = GridSpec.uniform(-10.0, 10.0, 20001)

    def kinked(y):
        y = np.asarray(y, dtype=float)
        return np.where(y <= 1.0, y * y, 2.0 - y)

    return {
        "phi": ScalarField.from_callable(kinked, dom),
        "psi": ScalarField.from_expression("x1^2", dom),
        "weights": WeightedSpace(weights=(1.0, 1.0, 1.0), p=2.0),
        "r": 1.0,
    }


def _square_constraint() -> dict:
    dom = GridSpec.uniform(-10.0, 10.0, 20001)
    return {
        "phi": ScalarField.from_expression("x1", dom),
        "psi": ScalarField.from_expression("x1^2", dom),
        "weights": WeightedSpace(weights=(1.0, 1.0, 1.0), p=2.0),
        "r": 1.0,
    }


def _remark_8_3() -> dict:
    dom = GridSpec.uniform(-10.0, 10.0, 4001)
    f = ScalarField.from_expression(
        "log(1 + max(x1, 0)^2) + 0.5*max(x1, 0)", dom
    )
    return {
        "f": f,
        "weights": WeightedSpace(weights=(0.5, 0.5), p=2.0),
        "u": (0.0, 2.0),
    }


def _sphere_quartic() -> dict:
    dom = GridSpec.uniform(0.0, 10.0, 100001)
    psi = ScalarField.from_expression("2*x1^2 - x1^4", dom)
    return {"problem": SphericalProblem.from_field(psi)}


def _segment_points() -> dict:
    return {"points": np.array([[0.0, 0.0], [1.0, 0.0]])}


def _triangle_points() -> dict:
    return {
        "points": np.array(
            [[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]]
        )
    }


BUILTINS: dict[str, Fixture] = {
    f.name: f
    for f in [
        Fixture("example_1_1", "bivariate", _example_1_1,
                "two-point x-grid against [0,1] with a unit jump at y=0"),
        Fixture("linear_quadratic", "multiplier", _linear_quadratic,
                "J=x with Phi=x^2 on [-10,10]"),
        Fixture("quartic_linear", "multiplier", _quartic_linear,
                "J=x^4 with Phi=x on [-3,3], both multiplier ends open"),
        Fixture("double_well", "scalar", _double_well,
                "(x^2-1)^2 on [-2,2], two global minima"),
        Fixture("pure_square", "scalar", _pure_square,
                "x^2 on [-1,1], a unique global minimum"),
        Fixture("remark_5_1", "scalar_pair", _remark_5_1,
                "F=-x^3 with Phi=x^2 on [-3,3]"),
        Fixture("remark_8_1", "integral", _remark_8_1,
                "kinked phi with psi=y^2; the identity fails at r=1"),
        Fixture("square_constraint", "integral", _square_constraint,
                "phi=y with psi=y^2 and three unit atoms"),
        Fixture("remark_8_3", "jensen", _remark_8_3,
                "log(1+(y+)^2) plus a sub-p power term"),
        Fixture("sphere_quartic", "spherical", _sphere_quartic,
                "2x^2-x^4 on the half-line box [0,10]"),
        Fixture("segment_points", "points", _segment_points,
                "two points on the x-axis"),
        Fixture("triangle_points", "points", _triangle_points,
                "equilateral triangle with unit side"),
    ]
}


def get_builtin(name: str) -> dict:
    fixture = BUILTINS.get(name)
    if fixture is None:
        known = ", ".join(sorted(BUILTINS))
        raise ConfigError(f"unknown builtin {name!r} (known: {known})")
    made = fixture.make()
    made["kind"] = fixture.kind
    made["name"] = fixture.name
    return made
