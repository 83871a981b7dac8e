"""Ket augmentation (KA) and overlapping ket augmentation (OKA) of images.

An image axis of length ``L`` is split at each level into ``b`` blocks of
length ``m`` that overlap by ``o`` pixels, ``L = b m - (b - 1) o``. A level
splits rows into ``b_row`` and columns into ``b_col`` blocks and becomes
one tensor mode of size ``b_row * b_col``; the mode index ``t`` selects the
row block ``t % b_row`` and the column block ``t // b_row``. After the last
level both axes have length 1, so each tensor entry copies one pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .quattensor import QuaternionTensor

OVERLAPS = (2, 1, 0)


class PlanningError(ValueError):
    """No split chain reaches the requested target dims."""


@dataclass(frozen=True)
class AxisSplit:
    blocks: int
    length: int
    overlap: int

    @property
    def step(self) -> int:
        return self.length - self.overlap


@dataclass(frozen=True)
class Level:
    rows: AxisSplit
    cols: AxisSplit

    @property
    def size(self) -> int:
        return self.rows.blocks * self.cols.blocks


@dataclass(frozen=True)
class AugmentPlan:
    height: int
    width: int
    levels: tuple[Level, ...]

    @property
    def source_dims(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def target_dims(self) -> tuple[int, ...]:
        return tuple(lv.size for lv in self.levels)

    @property
    def is_ka(self) -> bool:
        return all(lv.rows.overlap == 0 and lv.cols.overlap == 0 for lv in self.levels)

    @cached_property
    def index_map(self) -> tuple[np.ndarray, np.ndarray]:
        """Source ``(row, col)`` of every target entry, each of shape ``target_dims``."""
        dims = self.target_dims
        rows = np.zeros(dims, dtype=np.int64)
        cols = np.zeros(dims, dtype=np.int64)
        for n, lv in enumerate(self.levels):
            t = np.arange(lv.size).reshape([-1 if i == n else 1 for i in range(len(dims))])
            rows = rows + (t % lv.rows.blocks) * lv.rows.step
            cols = cols + (t // lv.rows.blocks) * lv.cols.step
        return rows, cols

    @cached_property
    def source_index(self) -> np.ndarray:
        """Column-major linear source pixel of every target entry."""
        rows, cols = self.index_map
        return rows + self.height * cols

    def multiplicity(self) -> np.ndarray:
        """How many target entries copy each source pixel, as an H x W array."""
        counts = np.bincount(self.source_index.ravel(), minlength=self.height * self.width)
        return counts.reshape(self.source_dims, order="F")

    def to_text(self) -> str:
        lines = [
            f"source {self.height} {self.width}",
            "target " + " ".join(map(str, self.target_dims)),
        ]
        for n, lv in enumerate(self.levels, 1):
            r, c = lv.rows, lv.cols
            lines.append(
                f"level {n} rows {r.blocks} {r.length} {r.overlap} cols {c.blocks} {c.length} {c.overlap}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> AugmentPlan:
        height = width = None
        levels = []
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "source":
                height, width = int(parts[1]), int(parts[2])
            elif parts[0] == "level":
                v = [int(p) for p in parts[3:6] + parts[7:10]]
                levels.append(Level(AxisSplit(*v[:3]), AxisSplit(*v[3:])))
        if height is None or not levels:
            raise ValueError("plan manifest needs a source line and at least one level")
        p = cls(height, width, tuple(levels))
        _validate(p)
        return p

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> AugmentPlan:
        return cls.from_text(Path(path).read_text())


def _validate(p: AugmentPlan) -> None:
    for axis, length in (("rows", p.height), ("cols", p.width)):
        for n, lv in enumerate(p.levels, 1):
            s = getattr(lv, axis)
            if s.blocks * s.length - (s.blocks - 1) * s.overlap != length or not 0 <= s.overlap < max(s.length, 1):
                raise ValueError(f"level {n} {axis} split {s} does not tile length {length}")
            length = s.length
        if length != 1:
            raise ValueError(f"{axis} end at length {length}, expected 1")


def _axis_options(length: int, blocks: int) -> list[AxisSplit]:
    if blocks == 1:
        return [AxisSplit(1, length, 0)]
    out = []
    for o in OVERLAPS:
        m, rem = divmod(length + (blocks - 1) * o, blocks)
        if rem == 0 and o < m:
            out.append(AxisSplit(blocks, m, o))
    return out


def _factor_pairs(d: int) -> list[tuple[int, int]]:
    pairs = [(r, d // r) for r in range(1, d + 1) if d % r == 0]
    # most balanced first; on ties more row blocks first
    return sorted(pairs, key=lambda rc: (abs(rc[0] - rc[1]), -rc[0]))


def plan(height: int, width: int, target_dims: Sequence[int]) -> AugmentPlan:
    """Deterministic split plan lifting an ``height x width`` image to ``target_dims``.

    Depth-first over levels; each level tries the most balanced row/column
    factor pair first and, per axis, the largest overlap first.
    """
    dims = tuple(int(d) for d in target_dims)
    if height < 1 or width < 1:
        raise PlanningError("image dims must be positive")
    if not dims or any(d < 1 for d in dims):
        raise PlanningError(f"invalid target dims {dims}")
    failed: set[tuple[int, int, int]] = set()

    def search(n: int, r: int, c: int) -> list[Level] | None:
        if n == len(dims):
            return [] if (r, c) == (1, 1) else None
        if (n, r, c) in failed:
            return None
        for br, bc in _factor_pairs(dims[n]):
            for rs in _axis_options(r, br):
                for cs in _axis_options(c, bc):
                    rest = search(n + 1, rs.length, cs.length)
                    if rest is not None:
                        return [Level(rs, cs), *rest]
        failed.add((n, r, c))
        return None

    levels = search(0, height, width)
    if levels is None:
        bad = [name for name, L, ax in (("rows (height)", height, 0), ("cols (width)", width, 1))
               if not _reaches_one(L, dims, ax)]
        where = "failing axis: " + " and ".join(bad) if bad else "each axis fits alone but not jointly"
        raise PlanningError(
            f"cannot lift {height}x{width} to {list(dims)}: no split chain with overlaps "
            f"{sorted(OVERLAPS)} ends at length 1 ({where})"
        )
    return AugmentPlan(height, width, tuple(levels))


def _reaches_one(length: int, dims: Sequence[int], axis: int) -> bool:
    """Whether one axis alone can reach length 1 using any factor of each level."""
    frontier = {length}
    for d in dims:
        nxt = set()
        for L in frontier:
            for b in {rc[axis] for rc in _factor_pairs(d)}:
                nxt.update(s.length for s in _axis_options(L, b))
        frontier = nxt
    return 1 in frontier


def default_target_dims(height: int, width: int) -> tuple[int, ...]:
    """Order-``n`` shape of 4s with ``n = ceil(log2 max(H, W)) + 1``, else one level fewer."""
    n = math.ceil(math.log2(max(height, width, 2))) + 1
    for order in (n, n - 1):
        dims = (4,) * order
        try:
            plan(height, width, dims)
            return dims
        except PlanningError:
            continue
    raise PlanningError(f"no default 4-ary shape for {height}x{width}; pass target dims explicitly")


def _check_source(img: QuaternionTensor, p: AugmentPlan) -> None:
    if img.dims != p.source_dims:
        raise ValueError(f"image dims {img.dims} do not match plan source {p.source_dims}")


def forward(img: QuaternionTensor, p: AugmentPlan) -> QuaternionTensor:
    """Lift a quaternion matrix to the plan's target tensor by copying pixels."""
    _check_source(img, p)
    rows, cols = p.index_map
    return QuaternionTensor(img.data[:, rows, cols])


def forward_mask(mask: np.ndarray, p: AugmentPlan) -> np.ndarray:
    """An augmented entry is observed iff its source pixel is."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != p.source_dims:
        raise ValueError(f"mask shape {mask.shape} does not match plan source {p.source_dims}")
    rows, cols = p.index_map
    return mask[rows, cols]


def inverse(t: QuaternionTensor, p: AugmentPlan) -> QuaternionTensor:
    """Mean over all copies of each pixel.

    The mean is taken as ``ref + sum(x - ref) / count`` around the first
    copy, so identical copies give back that value exactly.
    """
    if t.dims != p.target_dims:
        raise ValueError(f"tensor dims {t.dims} do not match plan target {p.target_dims}")
    npix = p.height * p.width
    src = p.source_index.ravel()
    vals = t.data.reshape(4, -1)
    counts = np.bincount(src, minlength=npix)
    first = np.full(npix, -1, dtype=np.int64)
    first[src[::-1]] = np.arange(len(src) - 1, -1, -1)
    ref = vals[:, first]
    out = np.empty((4, npix))
    for c in range(4):
        dev = np.bincount(src, weights=vals[c] - ref[c, src], minlength=npix)
        out[c] = ref[c] + dev / counts
    return QuaternionTensor(out.reshape(4, p.height, p.width, order="F"))
