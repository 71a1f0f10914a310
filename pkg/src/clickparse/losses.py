"""Training losses.

* ``sp_loss`` - a triplet-style term over the stride-4 decoder features: an
  anchor cell of a part class is pulled toward the average feature of that
  class's clicks and pushed from the average click feature of each adjacent
  class, with a log-cosine hinge and margin.
* ``balanced_ce`` - cross entropy with per-class weights mixing pixel
  frequency and click frequency in equal halves.
* ``total_loss`` - their weighted sum.

Features and logits are torch tensors so the same code path serves training
and the finite-difference gradient checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .clicks import ClickSet
from .geometry import AdjacencyPairs, LabelMask

FEATURE_STRIDE = 4


@dataclass
class SPLossConfig:
    margin: float = 1.5           # required log-similarity gap
    weight: float = 1.0           # multiplier in the total loss
    anchors_per_pair: int = 1
    similarity_floor: float = 1e-6
    literal_hinge: bool = False   # min(.., 0) form kept for comparison only

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.weight < 0:
            raise ValueError("weight must be >= 0")
        if self.anchors_per_pair < 1:
            raise ValueError("anchors_per_pair must be >= 1")


def downsample_mask(mask: LabelMask, stride: int = FEATURE_STRIDE) -> np.ndarray:
    """Majority-vote label per stride x stride cell (ties -> smallest class).

    Output shape is (ceil(H/s), ceil(W/s)); edge cells cover partial windows.
    """
    lab = mask.labels
    h, w = lab.shape
    hs = -(-h // stride)
    ws = -(-w // stride)
    cell = (np.arange(h)[:, None] // stride) * ws + (np.arange(w)[None, :] // stride)
    counts = np.zeros((hs * ws, mask.num_classes), dtype=np.int64)
    np.add.at(counts, (cell.ravel(), lab.ravel()), 1)
    return counts.argmax(axis=1).reshape(hs, ws)  # argmax picks smallest id on ties


def map_click_to_cell(row: int, col: int, stride: int = FEATURE_STRIDE) -> tuple[int, int]:
    return row // stride, col // stride


def click_average_feature(features: torch.Tensor, clicks: ClickSet, class_id: int,
                          stride: int = FEATURE_STRIDE) -> torch.Tensor | None:
    """Mean feature vector over the class's clicks mapped to the stride grid,
    or None when the class has no clicks."""
    pts = clicks.positions(class_id)
    if pts.shape[0] == 0:
        return None
    rows = torch.as_tensor(pts[:, 0] // stride, dtype=torch.long)
    cols = torch.as_tensor(pts[:, 1] // stride, dtype=torch.long)
    return features[:, rows, cols].mean(dim=1)


def sp_loss(features: torch.Tensor, mask: LabelMask, clicks: ClickSet,
            adjacency: AdjacencyPairs, cfg: SPLossConfig,
            rng: np.random.Generator) -> torch.Tensor:
    """Mean hinge over sampled (anchor, positive-class, adjacent-class)
    triplets; zero when no adjacent pair has clicks on both sides.

    For each ordered adjacent pair (m, n) with m a part class, both classes
    clicked and class m present on the stride-4 grid, ``anchors_per_pair``
    anchor cells of class m are drawn; cosine similarities against the two
    click averages are shifted to (s+1)/2, floored, log-ed, and hinged at the
    margin.
    """
    if not torch.isfinite(features).all():
        raise ValueError("non-finite feature")
    small = downsample_mask(mask)
    clicked = {c: click_average_feature(features, clicks, c) for c in clicks.present_classes()}
    anchor_cells, pos_ids, neg_ids = [], [], []
    for m in range(1, mask.num_classes):
        if clicked.get(m) is None:
            continue
        cells = np.argwhere(small == m)
        if cells.shape[0] == 0:
            continue
        for n in adjacency.neighbors_of(m):
            if clicked.get(n) is None:
                continue
            for _ in range(cfg.anchors_per_pair):
                r, c = cells[rng.integers(0, cells.shape[0])]
                anchor_cells.append((int(r), int(c)))
                pos_ids.append(m)
                neg_ids.append(n)
    if not anchor_cells:
        return features.sum() * 0.0
    idx = torch.as_tensor(anchor_cells, dtype=torch.long)
    anchors = features[:, idx[:, 0], idx[:, 1]].T          # (T, D)
    pos = torch.stack([clicked[m] for m in pos_ids])       # (T, D)
    neg = torch.stack([clicked[n] for n in neg_ids])       # (T, D)

    def shifted_cos(a, b):
        denom = torch.clamp(
            torch.linalg.vector_norm(a, dim=1) * torch.linalg.vector_norm(b, dim=1),
            min=1e-12,
        )
        return torch.clamp(((a * b).sum(dim=1) / denom + 1) / 2, min=cfg.similarity_floor)

    gap = torch.log(shifted_cos(anchors, neg)) - torch.log(shifted_cos(anchors, pos)) + cfg.margin
    hinged = torch.clamp(gap, max=0.0) if cfg.literal_hinge else torch.clamp(gap, min=0.0)
    return hinged.mean()


def class_weights(mask: LabelMask, clicks: ClickSet) -> np.ndarray:
    """Length-(C+1) positive weights, mean 1: half inverse pixel frequency,
    half inverse click frequency, both add-one smoothed."""
    n_classes = mask.num_classes
    pix = np.bincount(mask.labels.ravel(), minlength=n_classes).astype(np.float64)
    clk = np.zeros(n_classes, dtype=np.float64)
    for c in clicks:
        clk[c.class_id] += 1
    p = (pix.sum() / n_classes) / (pix + 1.0)
    k = (clk.sum() / n_classes) / (clk + 1.0)
    raw = 0.5 * p + 0.5 * k
    return raw / raw.mean()


def balanced_ce(logits: torch.Tensor, mask: LabelMask, weights: np.ndarray) -> torch.Tensor:
    """Mean over pixels of w[y(p)] * (-log softmax(logits)[y(p)][p])."""
    if logits.ndim != 3 or logits.shape[0] != mask.num_classes \
            or logits.shape[1:] != (mask.height, mask.width):
        raise ValueError("logits shape does not match mask")
    target = torch.from_numpy(mask.labels.copy()).long()
    logp = torch.log_softmax(logits, dim=0)
    nll = -logp.gather(0, target.unsqueeze(0)).squeeze(0)
    w = torch.as_tensor(weights, dtype=logits.dtype)[target]
    return (w * nll).mean()


def total_loss(ce: torch.Tensor, sp: torch.Tensor, weight: float) -> torch.Tensor:
    return ce + weight * sp
