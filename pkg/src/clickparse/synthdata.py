"""Procedural figures with part masks, plus the on-disk dataset format.

Each sample is a small articulated figure: head disk, torso rectangle, and
four capsule limbs with randomized joints. Mirrored limb pairs usually share
identical colors so RGB alone cannot tell left from right - the clicks have
to. Occasionally a limb is drawn across the torso, splitting it into several
connected components.

All rasterization decisions are exact integer comparisons (no trig, no
rounded floats), so a (seed, index) pair produces identical bytes on every
platform.

Disk layout: ``images/{id}.png`` (RGB), ``masks/{id}.png`` (single channel,
pixel = class index), ``meta.json`` (class names, flip pairs, generator
parameters). The same layout serves as the ingestion format for real data.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import LabelMask

DEFAULT_CLASS_NAMES = (
    "background", "head", "torso", "left_arm", "right_arm", "left_leg", "right_leg",
)

# vivid part colors vs. a muted background band, so background stays
# recognizable even without clicks
_PART_BASE_COLORS = np.array([
    (224, 64, 48), (64, 160, 224), (64, 192, 96), (224, 176, 48),
    (176, 64, 208), (224, 112, 160), (96, 208, 208), (240, 128, 48),
    (128, 128, 240), (192, 224, 64), (240, 80, 112), (80, 240, 160),
], dtype=np.int64)
_BG_BASE = np.array((96, 96, 88), dtype=np.int64)
_NOISE_AMP = 12


def default_class_names(num_parts: int) -> list[str]:
    if num_parts == 6:
        return list(DEFAULT_CLASS_NAMES)
    names = ["background", "head", "torso"]
    for i in range(3, num_parts + 1, 2):
        names.append(f"left_limb_{(i - 1) // 2}")
        if len(names) <= num_parts:
            names.append(f"right_limb_{(i - 1) // 2}")
    return names[: num_parts + 1]


def default_flip_pairs(num_parts: int) -> list[list[int]]:
    return [[i, i + 1] for i in range(3, num_parts, 2)]


@dataclass
class DatasetSpec:
    num_parts: int = 6           # part classes, background excluded
    image_size: int = 64
    samples: int = 100
    seed: int = 0
    ambiguity: float = 0.8       # P(mirrored parts share identical colors)
    occlusion: float = 0.3       # P(one limb is drawn across the torso)
    class_names: list = field(default_factory=lambda: list(DEFAULT_CLASS_NAMES))
    flip_pairs: list = field(default_factory=lambda: default_flip_pairs(6))

    def __post_init__(self):
        if self.num_parts < 2:
            raise ValueError("need at least 2 part classes")
        if self.image_size < 32:
            raise ValueError("image_size must be >= 32")
        if not (0 <= self.ambiguity <= 1 and 0 <= self.occlusion <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if len(self.class_names) != self.num_parts + 1:
            self.class_names = default_class_names(self.num_parts)

    @property
    def num_classes(self) -> int:
        return self.num_parts + 1


@dataclass
class Sample:
    image: np.ndarray  # (H, W, 3) uint8
    mask: LabelMask
    id: str


def _disk(h: int, w: int, cy: int, cx: int, radius: int) -> np.ndarray:
    rr = np.arange(h, dtype=np.int64)[:, None] - cy
    cc = np.arange(w, dtype=np.int64)[None, :] - cx
    return rr * rr + cc * cc <= radius * radius


def _capsule(h: int, w: int, a: tuple[int, int], b: tuple[int, int], radius: int) -> np.ndarray:
    """Pixels within ``radius`` of segment a-b, decided in exact integers."""
    ay, ax = a
    by, bx = b
    py = np.arange(h, dtype=np.int64)[:, None]
    px = np.arange(w, dtype=np.int64)[None, :]
    apy, apx = py - ay, px - ax
    aby, abx = by - ay, bx - ax
    ab2 = aby * aby + abx * abx
    r2 = radius * radius
    ap2 = apy * apy + apx * apx
    if ab2 == 0:
        return ap2 <= r2
    t = apy * aby + apx * abx
    bp2 = (py - by) ** 2 + (px - bx) ** 2
    mid = (t >= 0) & (t <= ab2) & (ap2 * ab2 - t * t <= r2 * ab2)
    return mid | ((t < 0) & (ap2 <= r2)) | ((t > ab2) & (bp2 <= r2))


def _rect(h: int, w: int, r0: int, c0: int, r1: int, c1: int) -> np.ndarray:
    out = np.zeros((h, w), dtype=bool)
    out[max(r0, 0):max(r1, 0), max(c0, 0):max(c1, 0)] = True
    return out


def _chance(rng: np.random.Generator, p: float) -> bool:
    return int(rng.integers(0, 1_000_000)) < int(round(p * 1_000_000))


def _jitter_color(rng: np.random.Generator, base: np.ndarray) -> np.ndarray:
    return np.clip(base + rng.integers(-20, 21, size=3), 0, 255)


def _build_figure(spec: DatasetSpec, rng: np.random.Generator):
    """Return (list of (class_id, bool mask) in paint order, colors array)."""
    s = spec.image_size
    h = w = s
    cx = s // 2 + int(rng.integers(-s // 10, s // 10 + 1))
    cy = s // 2 + int(rng.integers(-s // 12, s // 12 + 1))

    tw = int(rng.integers(s // 5, s // 3 + 1))
    th = int(rng.integers(s // 4, (2 * s) // 5 + 1))
    torso = _rect(h, w, cy - th // 2, cx - tw // 2, cy + th - th // 2, cx + tw - tw // 2)

    head_r = int(rng.integers(s // 11, s // 7 + 1))
    head_cy = cy - th // 2 - head_r + 1 + int(rng.integers(-1, 2))
    head = _disk(h, w, max(head_r, head_cy), cx + int(rng.integers(-2, 3)), head_r)

    limb_r = max(1, int(rng.integers(s // 22, s // 14 + 1)))
    shoulder_y = cy - th // 2 + limb_r
    hip_y = cy + th - th // 2 - limb_r
    left_x = cx - tw // 2
    right_x = cx + tw - tw // 2 - 1

    lo, hi = s // 5, (2 * s) // 5
    limbs = []  # (class_id, start, end)
    # arms: class 3 left, 4 right; legs: 5 left, 6 right (ids beyond num_parts skipped)
    limbs.append((3, (shoulder_y, left_x), (shoulder_y + int(rng.integers(-lo // 2, hi)), left_x - int(rng.integers(lo, hi)))))
    limbs.append((4, (shoulder_y, right_x), (shoulder_y + int(rng.integers(-lo // 2, hi)), right_x + int(rng.integers(lo, hi)))))
    limbs.append((5, (hip_y, cx - tw // 4), (hip_y + int(rng.integers(lo, hi)), cx - tw // 4 - int(rng.integers(0, hi // 2)))))
    limbs.append((6, (hip_y, cx + tw // 4), (hip_y + int(rng.integers(lo, hi)), cx + tw // 4 + int(rng.integers(0, hi // 2)))))

    occluder = None
    if _chance(rng, spec.occlusion):
        # redirect one arm across the torso and paint it last
        side = int(rng.integers(0, 2))
        cls = 3 + side
        start = (shoulder_y, left_x if side == 0 else right_x)
        end_x = cx + (tw // 2 + int(rng.integers(2, 6))) * (1 if side == 0 else -1)
        end = (hip_y + int(rng.integers(-2, 3)), end_x)
        limbs = [l for l in limbs if l[0] != cls]
        occluder = (cls, start, end)

    layers = []
    for cls, a, b in limbs:
        if cls <= spec.num_parts:
            layers.append((cls, _capsule(h, w, a, b, limb_r)))
    layers.append((2, torso))
    layers.append((1, head))
    if occluder is not None and occluder[0] <= spec.num_parts:
        layers.append((occluder[0], _capsule(h, w, occluder[1], occluder[2], limb_r)))
    # classes beyond the four limbs become small accessory disks on top
    for cls in range(7, spec.num_parts + 1):
        acc_r = max(1, s // 16)
        acc_cy = int(rng.integers(acc_r, s - acc_r))
        acc_cx = int(rng.integers(acc_r, s - acc_r))
        layers.append((cls, _disk(h, w, acc_cy, acc_cx, acc_r)))

    # half the figures face away from the viewer, so the person's left side
    # lands on either image side; with shared pair colors only clicks can
    # then tell mirrored parts apart
    if _chance(rng, 0.5):
        layers = [(cls, m[:, ::-1]) for cls, m in layers]

    colors = np.zeros((spec.num_classes, 3), dtype=np.int64)
    colors[0] = _jitter_color(rng, _BG_BASE)
    for c in range(1, spec.num_classes):
        colors[c] = _jitter_color(rng, _PART_BASE_COLORS[(c - 1) % len(_PART_BASE_COLORS)])
    if _chance(rng, spec.ambiguity):
        for a, b in spec.flip_pairs:
            if a < spec.num_classes and b < spec.num_classes:
                colors[b] = colors[a]
    return layers, colors


def generate_sample(spec: DatasetSpec, index: int) -> Sample:
    """Deterministic sample for (spec.seed, index); retries with a bumped
    sub-seed in the rare case a class ends up fully hidden."""
    if not 0 <= index < spec.samples:
        raise ValueError("index out of range")
    for attempt in range(32):
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(index, attempt)))
        layers, colors = _build_figure(spec, rng)
        h = w = spec.image_size
        mask = np.zeros((h, w), dtype=np.int64)
        for cls, m in layers:
            mask[m] = cls
        present = np.unique(mask)
        if len(present) == spec.num_classes and 0 in present:
            break
    else:
        raise RuntimeError("could not place all classes")

    image = np.empty((h, w, 3), dtype=np.int64)
    image[:] = colors[mask]
    # textured background: integer diagonal ripple
    ripple = ((np.arange(h)[:, None] * 3 + np.arange(w)[None, :] * 2) // 4) % 24
    image[mask == 0] += ripple[mask == 0, None] - 12
    image += rng.integers(-_NOISE_AMP, _NOISE_AMP + 1, size=(h, w, 3))
    image = np.clip(image, 0, 255).astype(np.uint8)
    return Sample(image=image, mask=LabelMask(mask, spec.num_classes), id=f"{index:05d}")


def generate_dataset(spec: DatasetSpec) -> list[Sample]:
    return [generate_sample(spec, i) for i in range(spec.samples)]


def split_by_parity(samples: list[Sample]) -> tuple[list[Sample], list[Sample]]:
    """(even indices, odd indices) - disjoint and exhaustive by construction."""
    return samples[0::2], samples[1::2]


def write_dataset(spec: DatasetSpec, directory) -> None:
    root = Path(directory)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    for i in range(spec.samples):
        sample = generate_sample(spec, i)
        Image.fromarray(sample.image, mode="RGB").save(root / "images" / f"{sample.id}.png")
        Image.fromarray(sample.mask.labels.astype(np.uint8), mode="L").save(root / "masks" / f"{sample.id}.png")
    meta = asdict(spec)
    meta["ids"] = [f"{i:05d}" for i in range(spec.samples)]
    (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_meta(directory) -> dict:
    meta_path = Path(directory) / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"missing sample metadata: {meta_path}")
    meta = json.loads(meta_path.read_text())
    if "flip_pairs" not in meta:
        warnings.warn("meta.json has no flip_pairs; horizontal flips disabled")
        meta["flip_pairs"] = []
    return meta


def load_sample(directory, sample_id: str, num_classes: int | None = None) -> Sample:
    root = Path(directory)
    img_path = root / "images" / f"{sample_id}.png"
    mask_path = root / "masks" / f"{sample_id}.png"
    if not img_path.exists() or not mask_path.exists():
        raise FileNotFoundError(f"missing sample {sample_id!r} in {root}")
    if num_classes is None:
        meta = load_meta(root)
        num_classes = int(meta["num_parts"]) + 1
    image = np.asarray(Image.open(img_path).convert("RGB"))
    raw = np.asarray(Image.open(mask_path))
    if raw.ndim != 2:
        raise ValueError(f"corrupt mask for sample {sample_id!r}: not single-channel")
    if raw.max(initial=0) >= num_classes:
        raise ValueError(f"corrupt mask for sample {sample_id!r}: label out of range")
    return Sample(image=image, mask=LabelMask(raw.astype(np.int64), num_classes), id=sample_id)


def load_dataset(directory) -> tuple[list[Sample], dict]:
    meta = load_meta(directory)
    n_classes = int(meta["num_parts"]) + 1
    samples = [load_sample(directory, sid, n_classes) for sid in meta["ids"]]
    return samples, meta
