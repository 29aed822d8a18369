"""Core domain types: locations, rectangles, observations and covariance parameters.

Observations are stored column-wise (coordinate array, value array, role array)
rather than as lists of objects; ``Observation`` records are produced on demand.
All arrays are made read-only on construction so the containers can be shared
between workers without copying concerns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, NamedTuple, Sequence

import numpy as np


class Role(IntEnum):
    TRAIN = 0
    VALIDATION = 1
    TEST = 2
    UNUSED = 3  # left over when split fractions sum to less than one

    @classmethod
    def parse(cls, text: str) -> "Role":
        key = text.strip().lower()
        aliases = {"train": cls.TRAIN, "t": cls.TRAIN, "training": cls.TRAIN,
                   "validation": cls.VALIDATION, "valid": cls.VALIDATION, "v": cls.VALIDATION,
                   "test": cls.TEST, "p": cls.TEST,
                   "unused": cls.UNUSED}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown role {text!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


class Location(NamedTuple):
    x: float
    y: float

    def check(self) -> "Location":
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite location {self}")
        return self


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``[xmin, xmax) x [ymin, ymax)``.

    ``closed_x``/``closed_y`` close the upper edge. The partition root closes
    both, and children lying on the root's upper boundary inherit the closure,
    so every point of the domain belongs to exactly one leaf.
    """

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    closed_x: bool = False
    closed_y: bool = False

    def __post_init__(self):
        vals = (self.xmin, self.xmax, self.ymin, self.ymax)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite rectangle bounds {vals}")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate rectangle {vals}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def closed(self) -> "Rect":
        return Rect(self.xmin, self.xmax, self.ymin, self.ymax, True, True)

    def mask(self, locs: np.ndarray, delta: float = 0.0) -> np.ndarray:
        """Membership of ``locs`` (n x 2) in the rectangle dilated by ``delta`` (L-inf)."""
        x = locs[:, 0]
        y = locs[:, 1]
        hx = self.xmax + delta
        hy = self.ymax + delta
        inx = (x >= self.xmin - delta) & ((x <= hx) if self.closed_x else (x < hx))
        iny = (y >= self.ymin - delta) & ((y <= hy) if self.closed_y else (y < hy))
        return inx & iny

    def contains(self, loc: Location, delta: float = 0.0) -> bool:
        return bool(self.mask(np.array([[loc[0], loc[1]]], dtype=float), delta)[0])

    def split(self, axis: int, coord: float) -> tuple["Rect", "Rect"]:
        if axis == 0:
            if not self.xmin < coord < self.xmax:
                raise ValueError(f"split coordinate {coord} outside ({self.xmin}, {self.xmax})")
            return (Rect(self.xmin, coord, self.ymin, self.ymax, False, self.closed_y),
                    Rect(coord, self.xmax, self.ymin, self.ymax, self.closed_x, self.closed_y))
        if not self.ymin < coord < self.ymax:
            raise ValueError(f"split coordinate {coord} outside ({self.ymin}, {self.ymax})")
        return (Rect(self.xmin, self.xmax, self.ymin, coord, self.closed_x, False),
                Rect(self.xmin, self.xmax, coord, self.ymax, self.closed_x, self.closed_y))

    def to_dict(self) -> dict:
        return {"xmin": self.xmin, "xmax": self.xmax, "ymin": self.ymin, "ymax": self.ymax,
                "closed_x": self.closed_x, "closed_y": self.closed_y}

    @classmethod
    def from_dict(cls, d: dict) -> "Rect":
        return cls(d["xmin"], d["xmax"], d["ymin"], d["ymax"],
                   bool(d.get("closed_x", False)), bool(d.get("closed_y", False)))

    @classmethod
    def bounding(cls, locs: np.ndarray, pad: float = 0.0) -> "Rect":
        """Closed bounding box of ``locs``; zero-extent axes are widened by one unit."""
        lo = locs.min(axis=0)
        hi = locs.max(axis=0)
        lo = lo - pad
        hi = hi + pad
        for k in range(2):
            if hi[k] <= lo[k]:
                lo[k] -= 0.5
                hi[k] += 0.5
        return cls(float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]), True, True)


class Observation(NamedTuple):
    loc: Location
    value: float
    role: Role


@dataclass(frozen=True)
class Observations:
    """A set of observed locations with their values, in stored order."""

    locs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        locs = _frozen(self.locs).reshape(-1, 2)
        values = _frozen(self.values).reshape(-1)
        if locs.shape[0] != values.shape[0]:
            raise ValueError(f"{locs.shape[0]} locations but {values.shape[0]} values")
        if not (np.isfinite(locs).all() and np.isfinite(values).all()):
            raise ValueError("observations must be finite")
        object.__setattr__(self, "locs", locs)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def empty(cls) -> "Observations":
        return cls(np.empty((0, 2)), np.empty(0))

    @classmethod
    def from_list(cls, obs: Sequence[Observation]) -> "Observations":
        if not obs:
            return cls.empty()
        return cls(np.array([[o.loc[0], o.loc[1]] for o in obs], dtype=float),
                   np.array([o.value for o in obs], dtype=float))

    def take(self, idx) -> "Observations":
        return Observations(self.locs[idx], self.values[idx])

    def with_values(self, values) -> "Observations":
        return Observations(self.locs, values)


@dataclass(frozen=True)
class Dataset:
    """Spatial observations with role labels inside a rectangular domain."""

    locs: np.ndarray
    values: np.ndarray
    roles: np.ndarray
    domain: Rect
    seed: int | None = None  # seed of the role assignment, when randomised

    def __post_init__(self):
        locs = _frozen(self.locs).reshape(-1, 2)
        values = _frozen(self.values).reshape(-1)
        roles = _frozen(self.roles, dtype=np.int8).reshape(-1)
        if not (locs.shape[0] == values.shape[0] == roles.shape[0]):
            raise ValueError("locs, values and roles must have equal length")
        if not (np.isfinite(locs).all() and np.isfinite(values).all()):
            raise ValueError("dataset contains non-finite coordinates or values")
        if roles.size and (roles.min() < 0 or roles.max() > int(Role.UNUSED)):
            raise ValueError("invalid role code")
        if not self.domain.closed().mask(locs).all():
            raise ValueError("some observations lie outside the domain")
        object.__setattr__(self, "locs", locs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "roles", roles)

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_observations(cls, obs: Sequence[Observation], domain: Rect | None = None) -> "Dataset":
        locs = np.array([[o.loc[0], o.loc[1]] for o in obs], dtype=float).reshape(-1, 2)
        values = np.array([o.value for o in obs], dtype=float)
        roles = np.array([int(o.role) for o in obs], dtype=np.int8)
        return cls(locs, values, roles, domain if domain is not None else Rect.bounding(locs))

    @property
    def observations(self) -> list[Observation]:
        return list(self)

    def __iter__(self) -> Iterator[Observation]:
        for (x, y), v, r in zip(self.locs.tolist(), self.values.tolist(), self.roles.tolist()):
            yield Observation(Location(x, y), v, Role(r))

    def indices(self, role: Role) -> np.ndarray:
        return np.flatnonzero(self.roles == int(role))

    def subset(self, role: Role) -> Observations:
        idx = self.indices(role)
        return Observations(self.locs[idx], self.values[idx])

    @property
    def train(self) -> Observations:
        return self.subset(Role.TRAIN)

    @property
    def validation(self) -> Observations:
        return self.subset(Role.VALIDATION)

    @property
    def test(self) -> Observations:
        return self.subset(Role.TEST)

    def counts(self) -> dict[Role, int]:
        c = np.bincount(self.roles, minlength=len(Role))
        return {r: int(c[r]) for r in Role}

    def with_roles(self, roles, seed: int | None = None) -> "Dataset":
        return Dataset(self.locs, self.values, roles, self.domain, seed)

    def require_cv_roles(self) -> None:
        c = self.counts()
        if c[Role.TRAIN] < 1 or c[Role.VALIDATION] < 1:
            raise ValueError(f"cross-validation needs n_T >= 1 and n_V >= 1, got "
                             f"n_T={c[Role.TRAIN]}, n_V={c[Role.VALIDATION]}")


@dataclass(frozen=True)
class CovParams:
    """Prediction parameters: noise-to-signal ratio ``lam`` and range ``theta``."""

    lam: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.theta)):
            raise ValueError(f"non-finite covariance parameters {self}")
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "theta": self.theta}


@dataclass(frozen=True)
class CovParamsFull:
    """Likelihood parameters: marginal variance, nugget and range."""

    sigma2: float
    tau: float
    theta: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.sigma2, self.tau, self.theta)):
            raise ValueError(f"non-finite covariance parameters {self}")
        if self.sigma2 <= 0 or self.tau < 0 or self.theta <= 0:
            raise ValueError(f"need sigma2 > 0, tau >= 0, theta > 0; got {self}")

    def to_prediction_params(self) -> CovParams:
        return CovParams(self.tau / self.sigma2, self.theta)

    def to_dict(self) -> dict:
        return {"sigma2": self.sigma2, "tau": self.tau, "theta": self.theta}


def to_prediction_params(xi: CovParamsFull) -> CovParams:
    return xi.to_prediction_params()


@dataclass(frozen=True)
class AffineMap:
    """Per-axis affine map ``u = (x - offset) / scale`` onto the unit square."""

    offset: tuple[float, float]
    scale: tuple[float, float]

    def forward(self, locs: np.ndarray) -> np.ndarray:
        return (np.asarray(locs, dtype=float) - np.asarray(self.offset)) / np.asarray(self.scale)

    def inverse(self, locs: np.ndarray) -> np.ndarray:
        return np.asarray(locs, dtype=float) * np.asarray(self.scale) + np.asarray(self.offset)

    def to_dict(self) -> dict:
        return {"offset": list(self.offset), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineMap":
        return cls(tuple(d["offset"]), tuple(d["scale"]))


def rescale_unit(data: Dataset) -> tuple[Dataset, AffineMap]:
    """Map the domain onto ``[0, 1] x [0, 1]``, each axis independently."""
    d = data.domain
    amap = AffineMap((d.xmin, d.ymin), (d.width, d.height))
    locs = np.clip(amap.forward(data.locs), 0.0, 1.0)
    return Dataset(locs, data.values, data.roles, Rect(0.0, 1.0, 0.0, 1.0, True, True), data.seed), amap


def split_roles(n: int, fractions: tuple[float, float, float], seed: int) -> np.ndarray:
    """Seeded random role labels with exact counts.

    Counts are ``floor(n * f)`` per role; any remainder up to
    ``round(n * sum(f))`` is handed out by largest fractional part (ties in
    train, validation, test order). Positions are filled along a seeded
    permutation; points beyond the total are marked ``UNUSED``.
    """
    f = np.asarray(fractions, dtype=float)
    if f.shape != (3,) or (f < 0).any() or f.sum() > 1 + 1e-12:
        raise ValueError(f"invalid split fractions {fractions}")
    raw = n * f
    counts = np.floor(raw + 1e-9).astype(int)
    total = min(n, int(math.floor(n * f.sum() + 0.5)))
    rem = raw - counts
    for k in sorted(range(3), key=lambda k: (-rem[k], k)):
        if counts.sum() >= total:
            break
        if f[k] > 0:
            counts[k] += 1
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    roles = np.full(n, int(Role.UNUSED), dtype=np.int8)
    start = 0
    for role, c in zip((Role.TRAIN, Role.VALIDATION, Role.TEST), counts):
        roles[perm[start:start + c]] = int(role)
        start += c
    return roles


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``(seed, *keys)``; reproducible regardless of call order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
