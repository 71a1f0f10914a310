"""Training-time click simulation.

Four strategies:

* ``central_only``      - one max-margin click per part component plus one
                          background click far from part boundaries.
* ``random_clicks_only`` - ablation: the per-component click is a uniformly
                          random component pixel instead of a central one.
* ``random_sampling``   - central clicks, then 1..max_extra_clicks extra
                          clicks uniform over the whole image.
* ``near_edge``         - central clicks, then extra clicks uniform over the
                          set of pixels strictly closer than ``edge_margin``
                          to some part boundary.

Extra clicks carry the ground-truth class of their pixel; the number of
background extras is pushed into [bg_extra_min, bg_extra_max] whenever the
mask makes that possible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .clicks import Click, ClickSet
from .geometry import (
    LabelMask,
    PartComponent,
    all_part_components,
    part_boundary_pixels,
)

STRATEGIES = ("central_only", "random_sampling", "near_edge", "random_clicks_only")


@dataclass
class SimulationConfig:
    strategy: str = "random_sampling"
    n_candidates: int = 5        # candidates sampled per central click
    edge_margin: float = 10.0    # pixels; near-edge radius and background margin
    max_extra_clicks: int = 15   # extras drawn uniformly from 1..this
    bg_extra_min: int = 3
    bg_extra_max: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if not 0 <= self.bg_extra_min <= self.bg_extra_max:
            raise ValueError("need 0 <= bg_extra_min <= bg_extra_max")
        if self.max_extra_clicks < 1:
            raise ValueError("max_extra_clicks must be >= 1")
        if self.edge_margin < 1:
            raise ValueError("edge_margin must be >= 1")


def central_click(component: PartComponent, n_candidates: int, rng: np.random.Generator,
                  phase: str = "init", record: list | None = None) -> Click:
    """Draw ``n_candidates`` component pixels with replacement and return the
    one farthest from the component boundary (first drawn wins ties).

    If ``record`` is given, the candidate (row, col) pairs are appended to it
    so callers can audit the selection.
    """
    idx = rng.integers(0, component.area, size=n_candidates)
    cands = component.pixels[idx]
    if record is not None:
        record.extend((int(r), int(c)) for r, c in cands)
    dists = component.distance_to_boundary(cands)
    best = int(np.argmax(dists))  # first occurrence of the max
    return Click(int(cands[best, 0]), int(cands[best, 1]), component.class_id, phase=phase)


def background_click(mask: LabelMask, edge_margin: float, rng: np.random.Generator) -> Click | None:
    """One background click at least ``edge_margin`` pixels from every part
    boundary; falls back to the farthest background pixel, or None when the
    mask has no background at all."""
    bg = mask.class_mask(0)
    if not bg.any():
        return None
    boundary = part_boundary_pixels(mask)
    if boundary.shape[0] == 0:
        # no parts anywhere: every background pixel is infinitely far
        coords = np.argwhere(bg)
        r, c = coords[rng.integers(0, coords.shape[0])]
        return Click(int(r), int(c), 0, phase="init")
    src = np.ones((mask.height, mask.width), dtype=bool)
    src[boundary[:, 0], boundary[:, 1]] = False
    dist = ndimage.distance_transform_edt(src)
    eligible = bg & (dist >= edge_margin)
    if eligible.any():
        coords = np.argwhere(eligible)
        r, c = coords[rng.integers(0, coords.shape[0])]
    else:
        coords = np.argwhere(bg)
        d = dist[coords[:, 0], coords[:, 1]]
        r, c = coords[int(np.argmax(d))]  # argmax + lexicographic coords = deterministic
    return Click(int(r), int(c), 0, phase="init")


def near_edge_pixels(mask: LabelMask, edge_margin: float) -> np.ndarray:
    """(N, 2) pixels strictly closer than ``edge_margin`` to a part boundary
    (the boundary pixels themselves included). Empty if the mask has no parts."""
    boundary = part_boundary_pixels(mask)
    if boundary.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.int64)
    src = np.ones((mask.height, mask.width), dtype=bool)
    src[boundary[:, 0], boundary[:, 1]] = False
    dist = ndimage.distance_transform_edt(src)
    return np.argwhere(dist < edge_margin)


def _uniform_point(coords: np.ndarray, rng: np.random.Generator) -> tuple[int, int]:
    r, c = coords[rng.integers(0, coords.shape[0])]
    return int(r), int(c)


def _extra_clicks(mask: LabelMask, domain: np.ndarray, cfg: SimulationConfig,
                  rng: np.random.Generator) -> list[Click]:
    """Draw the extra clicks for random_sampling/near_edge from ``domain``
    and enforce the background quota.

    Excess background extras are redrawn as non-background domain pixels;
    a shortfall is fixed by converting the latest non-background extras to
    background draws (keeping the total), appending extra background clicks
    only when fewer than bg_extra_min extras exist overall.
    """
    if domain.shape[0] == 0:
        return []
    n_extra = int(rng.integers(1, cfg.max_extra_clicks + 1))
    labels = mask.labels
    picks = [_uniform_point(domain, rng) for _ in range(n_extra)]

    domain_labels = labels[domain[:, 0], domain[:, 1]]
    fg_domain = domain[domain_labels > 0]
    bg_domain = domain[domain_labels == 0]

    bg_idx = [i for i, (r, c) in enumerate(picks) if labels[r, c] == 0]
    if len(bg_idx) > cfg.bg_extra_max and fg_domain.shape[0] > 0:
        for i in bg_idx[cfg.bg_extra_max:]:
            picks[i] = _uniform_point(fg_domain, rng)
    elif len(bg_idx) < cfg.bg_extra_min and bg_domain.shape[0] > 0:
        need = cfg.bg_extra_min - len(bg_idx)
        fg_idx = [i for i, (r, c) in enumerate(picks) if labels[r, c] > 0]
        for i in reversed(fg_idx[len(fg_idx) - min(need, len(fg_idx)):]):
            picks[i] = _uniform_point(bg_domain, rng)
            need -= 1
        for _ in range(need):
            picks.append(_uniform_point(bg_domain, rng))

    return [Click(r, c, int(labels[r, c]), phase="extra") for r, c in picks]


def simulate(mask: LabelMask, cfg: SimulationConfig,
             rng: np.random.Generator | None = None) -> ClickSet:
    """Simulate one training click set for ``mask`` under ``cfg``.

    Deterministic given (mask, cfg, seed): pass no rng to derive one from
    cfg.seed, or pass an explicit generator to control the stream."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    clicks = ClickSet()
    for comp in all_part_components(mask):
        if cfg.strategy == "random_clicks_only":
            r, c = comp.pixels[rng.integers(0, comp.area)]
            clicks.add(Click(int(r), int(c), comp.class_id, phase="init"))
        else:
            clicks.add(central_click(comp, cfg.n_candidates, rng))
    bg = background_click(mask, cfg.edge_margin, rng)
    if bg is not None:
        clicks.add(bg)

    if cfg.strategy == "random_sampling":
        h, w = mask.height, mask.width
        domain = np.stack(np.unravel_index(np.arange(h * w), (h, w)), axis=1)
        clicks.extend(_extra_clicks(mask, domain, cfg, rng))
    elif cfg.strategy == "near_edge":
        domain = near_edge_pixels(mask, cfg.edge_margin)
        clicks.extend(_extra_clicks(mask, domain, cfg, rng))
    return clicks
