"""User clicks and their encoding into per-class localization maps.

Each class channel holds the squared Euclidean distance to the nearest click
of that class, truncated at 255; a class with no clicks gets a constant 255
channel ("maximally far"). The network input is the RGB image scaled to
[0, 1] concatenated with the localization maps scaled by 1/255.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

PHASES = ("init", "extra", "correction")
CLICK_CEILING = 255.0


@dataclass(frozen=True)
class Click:
    row: int
    col: int
    class_id: int
    phase: str = "init"
    round: int = 0

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown click phase {self.phase!r}")
        if self.round < 0:
            raise ValueError("round must be >= 0")


@dataclass
class ClickSet:
    """Ordered collection of clicks; order is preserved so the newest click
    can be undone."""

    clicks: list = field(default_factory=list)

    def add(self, click: Click) -> None:
        self.clicks.append(click)

    def extend(self, clicks) -> None:
        self.clicks.extend(clicks)

    def pop(self) -> Click:
        return self.clicks.pop()

    def per_class(self, class_id: int) -> list:
        return [c for c in self.clicks if c.class_id == class_id]

    def positions(self, class_id: int) -> np.ndarray:
        pts = [(c.row, c.col) for c in self.clicks if c.class_id == class_id]
        return np.asarray(pts, dtype=np.int64).reshape(-1, 2)

    def present_classes(self) -> list[int]:
        return sorted({c.class_id for c in self.clicks})

    def copy(self) -> "ClickSet":
        return ClickSet(list(self.clicks))

    def __len__(self) -> int:
        return len(self.clicks)

    def __iter__(self):
        return iter(self.clicks)

    def __getitem__(self, i):
        return self.clicks[i]

    def to_records(self) -> list[dict]:
        return [asdict(c) for c in self.clicks]

    @classmethod
    def from_records(cls, records) -> "ClickSet":
        return cls([Click(**r) for r in records])

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.to_records())

    @classmethod
    def from_jsonl(cls, text: str) -> "ClickSet":
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        return cls.from_records(records)


def encode_clicks(clicks: ClickSet, height: int, width: int, num_classes: int) -> np.ndarray:
    """(C+1, H, W) float32 localization maps, one channel per class.

    maps[i][p] = min(255, min over class-i clicks q of ||p - q||^2); a class
    with no clicks yields a constant-255 channel. Integer arithmetic up to the
    clamp, so the result is exact.
    """
    for c in clicks:
        if not (0 <= c.row < height and 0 <= c.col < width):
            raise ValueError("click outside image")
        if not 0 <= c.class_id < num_classes:
            raise ValueError("click class out of range")
    maps = np.full((num_classes, height, width), CLICK_CEILING, dtype=np.float32)
    rows = np.arange(height, dtype=np.int64)[:, None]
    cols = np.arange(width, dtype=np.int64)[None, :]
    for class_id in clicks.present_classes():
        pts = clicks.positions(class_id)
        d2 = np.full((height, width), np.iinfo(np.int64).max, dtype=np.int64)
        for r, c in pts:
            np.minimum(d2, (rows - r) ** 2 + (cols - c) ** 2, out=d2)
        maps[class_id] = np.minimum(d2, 255).astype(np.float32)
    return maps


def assemble_input(image: np.ndarray, maps: np.ndarray) -> np.ndarray:
    """Stack RGB/255 with maps/255 into the (3 + C + 1, H, W) network input."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("image must be H x W x 3")
    if maps.ndim != 3 or maps.shape[1:] != image.shape[:2]:
        raise ValueError("localization maps do not match image shape")
    rgb = image.astype(np.float32).transpose(2, 0, 1) / 255.0
    return np.concatenate([rgb, maps.astype(np.float32) / 255.0], axis=0)
