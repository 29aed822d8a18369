"""Recursive division of the domain into 2**q rectangles with delta-shells.

Each recursion step splits a rectangle so that both halves, counted together
with their shells, hold as equal a number of observations as possible.
Split lines alternate between vertical (depth 1) and horizontal (depth 2).
The shell of a rectangle is its L-infinity dilation by ``delta`` minus the
rectangle itself, clipped to the domain.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import EmptySubset
from .kriging import build_system, krige
from .model import CovParams, Dataset, Observations, Rect, Role, child_rng

BalanceOn = Literal["train", "train_and_validation"]


@dataclass(frozen=True)
class PartitionConfig:
    q: int = 0
    delta: float = 0.0
    shell_cap: int | None = None
    balance_on: BalanceOn = "train_and_validation"
    seed: int = 0

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 0:
            raise ValueError(f"q must be a non-negative integer, got {self.q}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.shell_cap is not None and self.shell_cap < 1:
            raise ValueError(f"shell_cap must be >= 1, got {self.shell_cap}")
        if self.balance_on not in ("train", "train_and_validation"):
            raise ValueError(f"unknown balance_on {self.balance_on!r}")

    @property
    def n_subsets(self) -> int:
        return 2 ** self.q

    def to_dict(self) -> dict:
        return {"q": self.q, "delta": self.delta, "shell_cap": self.shell_cap,
                "balance_on": self.balance_on, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "PartitionConfig":
        return cls(int(d["q"]), float(d["delta"]), d.get("shell_cap"),
                   d.get("balance_on", "train_and_validation"), int(d.get("seed", 0)))


@dataclass(frozen=True)
class Partition:
    rects: tuple[Rect, ...]
    config: PartitionConfig
    domain: Rect
    tree: dict
    empty_leaves: tuple[int, ...] = ()

    @property
    def n_subsets(self) -> int:
        return len(self.rects)

    def leaf_of(self, locs) -> np.ndarray:
        """1-based leaf index for each location (0 when outside the domain)."""
        locs = np.asarray(locs, dtype=float).reshape(-1, 2)
        out = np.zeros(locs.shape[0], dtype=int)
        for i, r in enumerate(self.rects, start=1):
            out[(out == 0) & r.mask(locs)] = i
        return out

    def groups(self, level: int) -> list[list[int]]:
        """Leaf indices merged up the split tree into ``level`` groups."""
        n = self.n_subsets
        if level < 1 or n % level or (level & (level - 1)):
            raise ValueError(f"aggregation level {level} does not divide {n} subsets")
        size = n // level
        return [list(range(g * size + 1, (g + 1) * size + 1)) for g in range(level)]

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "domain": self.domain.to_dict(),
                "rects": [r.to_dict() for r in self.rects], "tree": self.tree,
                "empty_leaves": list(self.empty_leaves)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Partition":
        return cls(tuple(Rect.from_dict(r) for r in d["rects"]), PartitionConfig.from_dict(d["config"]),
                   Rect.from_dict(d["domain"]), d["tree"], tuple(d.get("empty_leaves", ())))

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        return cls.from_dict(json.loads(text))


def _balance_points(data: Dataset, balance_on: BalanceOn) -> np.ndarray:
    keep = data.roles == int(Role.TRAIN)
    if balance_on == "train_and_validation":
        keep |= data.roles == int(Role.VALIDATION)
    return data.locs[keep]


def choose_split(pts: np.ndarray, rect: Rect, axis: int, delta: float) -> float:
    """Split coordinate balancing the two halves' counts including their shells.

    Candidates are midpoints between consecutive distinct coordinates of the
    points inside ``rect``; the first (smallest) minimiser of
    ``|left - right|`` wins. Falls back to the geometric midpoint when fewer
    than two distinct coordinates are available.
    """
    lo, hi = (rect.xmin, rect.xmax) if axis == 0 else (rect.ymin, rect.ymax)
    closed = rect.closed_x if axis == 0 else rect.closed_y
    mid = 0.5 * (lo + hi)
    inside = pts[rect.mask(pts), axis]
    coords = np.unique(inside)
    cand = 0.5 * (coords[:-1] + coords[1:])
    cand = cand[(cand > lo) & (cand < hi)]
    if cand.size == 0:
        return mid
    # points whose other coordinate lies within the rect dilated by delta
    o = 1 - axis
    olo, ohi = (rect.ymin, rect.ymax) if axis == 0 else (rect.xmin, rect.xmax)
    oclosed = rect.closed_y if axis == 0 else rect.closed_x
    ov = pts[:, o]
    band = (ov >= olo - delta) & ((ov <= ohi + delta) if oclosed else (ov < ohi + delta))
    a = np.sort(pts[band, axis])
    below_lo = np.searchsorted(a, lo - delta, side="left")
    upto_hi = np.searchsorted(a, hi + delta, side="right" if closed else "left")
    left = np.searchsorted(a, cand + delta, side="left") - below_lo
    right = upto_hi - np.searchsorted(a, cand - delta, side="left")
    return float(cand[int(np.argmin(np.abs(left - right)))])


def recursive_partition(data: Dataset, config: PartitionConfig) -> Partition:
    if len(data) == 0:
        raise ValueError("cannot partition an empty dataset")
    n_train = int(np.count_nonzero(data.roles == int(Role.TRAIN)))
    if config.n_subsets > n_train:
        raise ValueError(f"2**q = {config.n_subsets} subsets exceed n_T = {n_train}")
    pts = _balance_points(data, config.balance_on)
    root = data.domain.closed()
    rects: list[Rect] = []

    def grow(rect: Rect, depth: int) -> dict:
        if depth == config.q:
            rects.append(rect)
            return {"leaf": len(rects)}
        axis = depth % 2
        coord = choose_split(pts, rect, axis, config.delta)
        left, right = rect.split(axis, coord)
        return {"axis": "x" if axis == 0 else "y", "coord": coord, "depth": depth + 1,
                "left": grow(left, depth + 1), "right": grow(right, depth + 1)}

    tree = grow(root, 0)
    val = data.locs[data.roles == int(Role.VALIDATION)]
    empty = tuple(i for i, r in enumerate(rects, start=1) if not r.mask(val).any())
    if empty:
        warnings.warn(f"{len(empty)} of {len(rects)} subsets have no validation data: {list(empty)}",
                      EmptySubset, stacklevel=2)
    return Partition(tuple(rects), config, root, tree, empty)


@dataclass(frozen=True)
class SubsetData:
    """One sub-domain's augmented training set and its validation set."""

    index: int
    rect: Rect
    train: Observations
    validation: Observations
    is_shell: np.ndarray
    train_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    validation_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def shell_count(self) -> int:
        return int(np.count_nonzero(self.is_shell))

    @property
    def n_v(self) -> int:
        return len(self.validation)

    @property
    def n_t(self) -> int:
        return len(self.train)

    @property
    def is_empty(self) -> bool:
        return self.n_v == 0


def assign_subsets(data: Dataset, partition: Partition) -> list[SubsetData]:
    cfg = partition.config
    tr = data.indices(Role.TRAIN)
    va = data.indices(Role.VALIDATION)
    tr_locs = data.locs[tr]
    va_locs = data.locs[va]
    out = []
    for i, rect in enumerate(partition.rects, start=1):
        v_idx = va[rect.mask(va_locs)]
        core = rect.mask(tr_locs)
        shell = rect.mask(tr_locs, cfg.delta) & ~core if cfg.delta > 0 else np.zeros_like(core)
        if cfg.shell_cap is not None and np.count_nonzero(shell) > cfg.shell_cap:
            pos = np.flatnonzero(shell)
            keep = child_rng(cfg.seed, i).choice(pos, size=cfg.shell_cap, replace=False)
            shell = np.zeros_like(shell)
            shell[keep] = True
        member = core | shell
        t_idx = tr[member]
        out.append(SubsetData(
            index=i, rect=rect,
            train=Observations(data.locs[t_idx], data.values[t_idx]),
            validation=Observations(data.locs[v_idx], data.values[v_idx]),
            is_shell=shell[member].copy(),
            train_index=t_idx, validation_index=v_idx))
    return out


def predict_local(data: Dataset, partition: Partition, params: CovParams, targets) -> np.ndarray:
    """Predict at new locations from the training data of the containing sub-domain and its shell.

    One kriging system is built per sub-domain that receives targets.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    leaf = partition.leaf_of(targets)
    if (leaf == 0).any():
        raise ValueError(f"{int((leaf == 0).sum())} target(s) lie outside the partition domain")
    tr = data.indices(Role.TRAIN)
    tr_locs = data.locs[tr]
    out = np.empty(targets.shape[0])
    for i in np.unique(leaf):
        rect = partition.rects[i - 1]
        sel = tr[rect.mask(tr_locs, partition.config.delta)]
        where = leaf == i
        if sel.size == 0:
            out[where] = 0.0  # zero-mean prior
            continue
        system = build_system(Observations(data.locs[sel], data.values[sel]), params)
        out[where] = krige(system, targets[where])
    return out
