"""Exponential covariance function and covariance / cross-covariance assembly.

Matrix assembly is delegated to a kernel backend: the compiled Cython module
``pargp._kernels`` when it is importable, else the numpy fallback
``pargp._kernels_py``. Setting ``PARGP_PURE_PYTHON=1`` forces the fallback.
The two backends agree to within a few ulps (libm ``exp`` versus numpy's);
results are bit-reproducible for a fixed backend.
"""
from __future__ import annotations

import importlib
import math
import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import Location

_FALLBACK = "pargp._kernels_py"
_COMPILED = "pargp._kernels"


def load_backend(name: str):
    """Return the kernel module for ``name`` in {"compiled", "python"}."""
    if name == "compiled":
        return importlib.import_module(_COMPILED)
    if name == "python":
        return importlib.import_module(_FALLBACK)
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        load_backend("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


def _select_backend():
    if os.environ.get("PARGP_PURE_PYTHON", "").strip() not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "compiled", load_backend("compiled")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _kernels = _select_backend()


def _as_xy(locs) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(locs, dtype=np.float64).reshape(-1, 2)
    return np.ascontiguousarray(a[:, 0]), np.ascontiguousarray(a[:, 1])


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not (math.isfinite(theta) and theta > 0):
        raise ValueError(f"theta must be positive and finite, got {theta}")
    return theta


def exp_cov(s1: Location, s2: Location, theta: float) -> float:
    """``exp(-||s1 - s2|| / theta)``."""
    theta = _check_theta(theta)
    vals = (s1[0], s1[1], s2[0], s2[1])
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("non-finite location")
    dx = s1[0] - s2[0]
    dy = s1[1] - s2[1]
    return math.exp(-math.sqrt(dx * dx + dy * dy) / theta)


@dataclass(frozen=True)
class Kernel:
    name: str
    point: Callable[[Location, Location, float], float]
    matrix: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    cross: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]


def _exp_matrix(x, y, theta, backend=None):
    mod = _kernels if backend is None else load_backend(backend)
    return mod.exp_cov_matrix(x, y, theta)


def _exp_cross(x1, y1, x2, y2, theta, backend=None):
    mod = _kernels if backend is None else load_backend(backend)
    return mod.exp_cross_cov(x1, y1, x2, y2, theta)


KERNELS: dict[str, Kernel] = {
    "exponential": Kernel("exponential", exp_cov, _exp_matrix, _exp_cross),
}


def get_kernel(name: str = "exponential") -> Kernel:
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; available: {sorted(KERNELS)}") from None


def cov_matrix(locs, theta: float, kernel: str = "exponential", backend: str | None = None) -> np.ndarray:
    """Dense correlation matrix ``{c(s_i, s_j)}`` (unit diagonal, exactly symmetric)."""
    theta = _check_theta(theta)
    x, y = _as_xy(locs)
    if x.size == 0:
        raise ValueError("cov_matrix needs at least one location")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("non-finite location")
    return get_kernel(kernel).matrix(x, y, theta, backend)


def cross_cov_matrix(locs, targets, theta: float, kernel: str = "exponential",
                     backend: str | None = None) -> np.ndarray:
    """Cross-correlations with shape ``(len(targets), len(locs))``."""
    theta = _check_theta(theta)
    x1, y1 = _as_xy(locs)
    x2, y2 = _as_xy(targets)
    if not (np.isfinite(x1).all() and np.isfinite(y1).all()
            and np.isfinite(x2).all() and np.isfinite(y2).all()):
        raise ValueError("non-finite location")
    return get_kernel(kernel).cross(x1, y1, x2, y2, theta, backend)


def cross_cov(locs, target: Location | Sequence[float], theta: float,
              kernel: str = "exponential") -> np.ndarray:
    """Vector of ``c(locs[i], target)``."""
    return cross_cov_matrix(locs, np.asarray(target, dtype=float).reshape(1, 2), theta, kernel)[0]
