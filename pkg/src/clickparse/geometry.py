"""Grid geometry shared by every other module: connected components of a label
mask, their boundaries, exact Euclidean distance fields, and class adjacency.

All functions are pure and operate on immutable inputs; connectivity is
8-connected throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

# full 3x3 structuring element = 8-connectivity
_STRUCT8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class LabelMask:
    """H x W grid of class indices in [0, C]; class 0 is background."""

    labels: np.ndarray
    num_classes: int  # C + 1, background included

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("label mask must be a non-empty 2-D grid")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if arr.size and (arr.min() < 0 or arr.max() >= self.num_classes):
            raise ValueError("label values must lie in [0, num_classes - 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def class_mask(self, class_id: int) -> np.ndarray:
        return self.labels == class_id

    def present_classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.labels))


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Per-pixel Euclidean distance to a source set (0 exactly on the set)."""

    values: np.ndarray
    metric: str = "euclidean"

    def __getitem__(self, rc):
        return self.values[rc]


@dataclass(eq=False)
class PartComponent:
    """One 8-connected component of one class.

    ``pixels`` and ``boundary`` are (N, 2) arrays of (row, col) sorted
    lexicographically; ``boundary`` holds the component pixels with at least
    one 8-neighbor outside the component or outside the image.
    """

    class_id: int
    pixels: np.ndarray
    boundary: np.ndarray
    grid_shape: tuple[int, int]
    _bd_field: np.ndarray | None = field(default=None, repr=False)
    _bbox: tuple[int, int] | None = field(default=None, repr=False)

    @property
    def area(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def min_pixel(self) -> tuple[int, int]:
        return int(self.pixels[0, 0]), int(self.pixels[0, 1])

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from each (row, col) in ``points`` to the
        component's boundary set. Exact; cached on first use."""
        if self._bd_field is None:
            r0, c0 = self.pixels.min(axis=0)
            r1, c1 = self.pixels.max(axis=0)
            src = np.ones((r1 - r0 + 1, c1 - c0 + 1), dtype=bool)
            src[self.boundary[:, 0] - r0, self.boundary[:, 1] - c0] = False
            self._bd_field = ndimage.distance_transform_edt(src)
            self._bbox = (int(r0), int(c0))
        r0, c0 = self._bbox
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        return self._bd_field[pts[:, 0] - r0, pts[:, 1] - c0]


@dataclass(frozen=True)
class AdjacencyPairs:
    """Unordered pairs {m, n} of class ids that touch somewhere (8-neighbor)."""

    pairs: frozenset

    def __contains__(self, pair) -> bool:
        m, n = pair
        return (min(m, n), max(m, n)) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def neighbors_of(self, class_id: int) -> list[int]:
        out = set()
        for m, n in self.pairs:
            if m == class_id:
                out.add(n)
            elif n == class_id:
                out.add(m)
        return sorted(out)


def connected_components(mask: LabelMask, class_id: int) -> list[PartComponent]:
    """8-connected components of one class, largest first.

    Ties in area break on the lexicographically smallest component pixel, so
    the ordering is fully deterministic.
    """
    if not 0 <= class_id < mask.num_classes:
        raise ValueError("class_id out of range")
    binary = mask.class_mask(class_id)
    if not binary.any():
        return []
    lab, n = ndimage.label(binary, structure=_STRUCT8)
    comps = []
    slices = ndimage.find_objects(lab)
    for k in range(1, n + 1):
        sl = slices[k - 1]
        local = lab[sl] == k
        interior = ndimage.binary_erosion(local, structure=_STRUCT8, border_value=0)
        # erosion on the tight bbox treats everything beyond it as outside,
        # which matches the definition (bbox edge pixels touch the outside)
        r0, c0 = sl[0].start, sl[1].start
        pix = np.argwhere(local)
        pix[:, 0] += r0
        pix[:, 1] += c0
        bd = np.argwhere(local & ~interior)
        bd[:, 0] += r0
        bd[:, 1] += c0
        comps.append(
            PartComponent(
                class_id=class_id,
                pixels=pix,
                boundary=bd,
                grid_shape=(mask.height, mask.width),
            )
        )
    comps.sort(key=lambda c: (-c.area, c.min_pixel))
    return comps


def all_part_components(mask: LabelMask) -> list[PartComponent]:
    """Components of every non-background class, in class order."""
    out = []
    for c in range(1, mask.num_classes):
        out.extend(connected_components(mask, c))
    return out


def distance_to_set(height: int, width: int, source) -> DistanceField:
    """Exact Euclidean distance from every grid pixel to the nearest source
    pixel. ``source`` is an iterable/array of (row, col)."""
    src = np.atleast_2d(np.asarray(list(source) if not isinstance(source, np.ndarray) else source, dtype=np.int64))
    if src.size == 0:
        raise ValueError("empty source set")
    if (
        src[:, 0].min() < 0
        or src[:, 0].max() >= height
        or src[:, 1].min() < 0
        or src[:, 1].max() >= width
    ):
        raise ValueError("source coordinates out of bounds")
    grid = np.ones((height, width), dtype=bool)
    grid[src[:, 0], src[:, 1]] = False
    values = ndimage.distance_transform_edt(grid)
    return DistanceField(values=values)


def part_adjacency(mask: LabelMask) -> AdjacencyPairs:
    """All unordered class pairs {m, n} with two 8-adjacent pixels of classes
    m and n. Background takes part like any other class."""
    lab = mask.labels
    pairs = set()
    # the four forward offsets cover all 8-neighbor pairs once
    for a, b in (
        (lab[:, :-1], lab[:, 1:]),      # right
        (lab[:-1, :], lab[1:, :]),      # down
        (lab[:-1, :-1], lab[1:, 1:]),   # down-right
        (lab[:-1, 1:], lab[1:, :-1]),   # down-left
    ):
        diff = a != b
        if diff.any():
            stacked = np.stack([a[diff], b[diff]])
            lo = stacked.min(axis=0)
            hi = stacked.max(axis=0)
            for m, n in np.unique(np.stack([lo, hi], axis=1), axis=0):
                pairs.add((int(m), int(n)))
    return AdjacencyPairs(pairs=frozenset(pairs))


def part_boundary_pixels(mask: LabelMask) -> np.ndarray:
    """(N, 2) array of all boundary pixels of all non-background components,
    lexicographically sorted. Empty (0, 2) array if the mask has no parts."""
    lab = mask.labels
    out = np.zeros(lab.shape, dtype=bool)
    for c in range(1, mask.num_classes):
        m = lab == c
        if not m.any():
            continue
        interior = ndimage.binary_erosion(m, structure=_STRUCT8, border_value=0)
        out |= m & ~interior
    return np.argwhere(out)


def interclass_boundary_pixels(mask: LabelMask) -> np.ndarray:
    """Pixels with an 8-neighbor of a different class (both sides of every
    inter-class edge, background included). (N, 2), sorted."""
    lab = mask.labels
    h, w = lab.shape
    out = np.zeros((h, w), dtype=bool)
    for s1, s2 in (
        ((slice(None), slice(0, w - 1)), (slice(None), slice(1, w))),        # right
        ((slice(0, h - 1), slice(None)), (slice(1, h), slice(None))),        # down
        ((slice(0, h - 1), slice(0, w - 1)), (slice(1, h), slice(1, w))),    # down-right
        ((slice(0, h - 1), slice(1, w)), (slice(1, h), slice(0, w - 1))),    # down-left
    ):
        diff = lab[s1] != lab[s2]
        out[s1] |= diff
        out[s2] |= diff
    return np.argwhere(out)
