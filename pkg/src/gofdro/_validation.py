"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


class ConfigurationError(ValueError):
    """Raised when user-supplied parameters are inconsistent or out of range."""


class DomainError(ValueError):
    """Raised when data violates a mathematical precondition of an operation."""


def as_float_array(a, name="array"):
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must contain only finite values")
    return arr


def as_data_matrix(X, name="X"):
    """Coerce to an (N, d) float matrix of observations.

    Accepts a 1-D array (treated as N univariate observations) or a 2-D
    array with one row per observation.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ConfigurationError(f"{name} must be 1-D or 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1:
        raise ConfigurationError(f"{name} must contain at least one observation")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must contain only finite values")
    return arr


def check_prob(p, name="alpha", open_interval=True):
    p = float(p)
    if open_interval and not 0.0 < p < 1.0:
        raise ConfigurationError(f"{name} must lie in (0, 1), got {p}")
    if not open_interval and not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"{name} must lie in [0, 1], got {p}")
    return p


def check_positive(v, name):
    v = float(v)
    if not v > 0:
        raise ConfigurationError(f"{name} must be positive, got {v}")
    return v


def check_count(n, name, minimum=1):
    n = int(n)
    if n < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {n}")
    return n


def rng_from(seed, stream=None):
    """Seeded PCG64 generator; `stream` spawns a deterministic substream.

    Substreams keyed on (seed, stream) are independent of worker count, so
    parallel replication studies are reproducible.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if stream is None:
        return np.random.default_rng(int(seed))
    return np.random.default_rng([int(seed), int(stream)])
