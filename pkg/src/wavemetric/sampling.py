"""Deterministic sampling helpers: Halton points and direction sets."""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

DEFAULT_SEED = 0x5EED


def halton_unit(n: int, d: int, *, skip: int = 1) -> np.ndarray:
    """First n unscrambled Halton points in (0,1)^d.

    The leading point of the raw sequence is the origin, which sits on the
    boundary; ``skip`` drops it so all returned points are strictly interior.
    """
    sampler = qmc.Halton(d=d, scramble=False)
    if skip:
        sampler.fast_forward(skip)
    return sampler.random(n)


def fibonacci_sphere(n: int) -> np.ndarray:
    """n near-uniform unit directions on S^2 (deterministic spiral lattice)."""
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack((r * np.cos(phi), r * np.sin(phi), z))


def circle_directions(n: int) -> np.ndarray:
    """n uniformly spaced unit directions in the plane."""
    t = 2.0 * np.pi * np.arange(n, dtype=float) / n
    return np.column_stack((np.cos(t), np.sin(t)))


def unit_directions(d: int) -> np.ndarray:
    """Default direction set per dimension: 2 / 128 / 256 samples for d=1/2/3."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        return circle_directions(128)
    if d == 3:
        return fibonacci_sphere(256)
    raise ValueError(f"unsupported dimension {d}")
