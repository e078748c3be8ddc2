"""Python front end for the coda C++ core."""

import json

from ._core import (
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
    matrix_distance,
    moons_domain,
    pearson_matrix,
    run_json,
    tv_distance,
)
from ._core import verify_bound as _verify_bound

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "ShapeError",
    "matrix_distance",
    "moons_domain",
    "pearson_matrix",
    "run",
    "tv_distance",
    "verify_bound",
]


def verify_bound(p_points, p_masses, q_points, q_masses):
    return json.loads(_verify_bound(p_points, p_masses, q_points, q_masses))


def run(config, threads=1):
    """Run the methods named in `config` (a dict shaped like the CLI config file)."""
    return json.loads(run_json(json.dumps(config), threads))
