"""Training loop: per iteration, draw a batch, augment, simulate clicks on
the augmented ground truth, encode, forward, and descend the combined
balanced-cross-entropy + semantic-perceiving objective with SGD under a
polynomial learning-rate schedule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict

import numpy as np
import torch
from PIL import Image

from .checkpoint import Checkpoint
from .clicks import ClickSet
from .geometry import LabelMask, part_adjacency
from .losses import SPLossConfig, balanced_ce, class_weights, sp_loss, total_loss
from .model import ModelConfig, SegNet, build_input
from .simulate import SimulationConfig, simulate
from .synthdata import Sample

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    iterations: int = 500
    batch_size: int = 8
    lr: float = 7e-4
    momentum: float = 0.9
    weight_decay: float = 5e-4
    poly_power: float = 0.9
    scale_min: float = 0.5
    scale_max: float = 1.5
    hflip: bool = True
    augment: bool = True
    seed: int = 0
    log_every: int = 100
    device: str = "cpu"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _resize(image: np.ndarray, mask: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    h, w = mask.shape
    nh, nw = max(1, round(h * scale)), max(1, round(w * scale))
    im = np.asarray(Image.fromarray(image).resize((nw, nh), Image.BILINEAR))
    mk = np.asarray(Image.fromarray(mask.astype(np.uint8)).resize((nw, nh), Image.NEAREST))
    return im, mk.astype(np.int64)


def _pad_to(image: np.ndarray, mask: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    h, w = mask.shape
    ph, pw = max(size - h, 0), max(size - w, 0)
    if ph or pw:
        image = np.pad(image, ((0, ph), (0, pw), (0, 0)))
        mask = np.pad(mask, ((0, ph), (0, pw)))
    return image, mask


def augment_sample(sample: Sample, crop: int, cfg: TrainConfig, flip_pairs: list,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random scale, crop and horizontal flip; flips swap paired class ids."""
    image, mask = sample.image, sample.mask.labels
    if cfg.augment:
        scale = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * rng.random()
        image, mask = _resize(image, mask, scale)
        image, mask = _pad_to(image, mask, crop)
        h, w = mask.shape
        r0 = int(rng.integers(0, h - crop + 1))
        c0 = int(rng.integers(0, w - crop + 1))
        image = image[r0:r0 + crop, c0:c0 + crop]
        mask = mask[r0:r0 + crop, c0:c0 + crop]
        if cfg.hflip and rng.integers(0, 2) == 1:
            image = image[:, ::-1].copy()
            mask = mask[:, ::-1].copy()
            if flip_pairs:
                swapped = mask.copy()
                for a, b in flip_pairs:
                    swapped[mask == a] = b
                    swapped[mask == b] = a
                mask = swapped
    else:
        image, mask = _pad_to(image, mask, crop)
        image = image[:crop, :crop]
        mask = mask[:crop, :crop]
    return np.ascontiguousarray(image), np.ascontiguousarray(mask)


def train(model_cfg: ModelConfig, train_cfg: TrainConfig, sim_cfg: SimulationConfig,
          dataset: list, sp_cfg: SPLossConfig | None = None,
          flip_pairs: list | None = None, class_names: list | None = None) -> Checkpoint:
    """Train a fresh network and return it as an in-memory checkpoint.

    Raises RuntimeError("training diverged") on a non-finite loss.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    if sp_cfg is None:
        sp_cfg = SPLossConfig(weight=0.0)
    flip_pairs = flip_pairs or []

    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence(train_cfg.seed))
    net = SegNet(model_cfg).to(train_cfg.device)
    net.train()
    opt = torch.optim.SGD(net.parameters(), lr=train_cfg.lr,
                          momentum=train_cfg.momentum,
                          weight_decay=train_cfg.weight_decay)
    history = []
    crop = model_cfg.crop_size
    use_sp = sp_cfg.weight > 0

    for it in range(train_cfg.iterations):
        frac = it / max(train_cfg.iterations, 1)
        lr = train_cfg.lr * (1 - frac) ** train_cfg.poly_power
        for group in opt.param_groups:
            group["lr"] = lr

        inputs, masks, clicksets = [], [], []
        for _ in range(train_cfg.batch_size):
            sample = dataset[int(rng.integers(0, len(dataset)))]
            image, labels = augment_sample(sample, crop, train_cfg, flip_pairs, rng)
            mask = LabelMask(labels, model_cfg.num_classes)
            clicks = simulate(mask, sim_cfg, rng)
            inputs.append(build_input(image, clicks, model_cfg.num_classes))
            masks.append(mask)
            clicksets.append(clicks)

        x = torch.from_numpy(np.stack(inputs)).to(train_cfg.device)
        logits, sp_feat = net(x)
        ce_terms, sp_terms = [], []
        for b, mask in enumerate(masks):
            w = class_weights(mask, clicksets[b])
            ce_terms.append(balanced_ce(logits[b], mask, w))
            if use_sp:
                adjacency = part_adjacency(mask)
                sp_terms.append(sp_loss(sp_feat[b], mask, clicksets[b], adjacency, sp_cfg, rng))
        ce = torch.stack(ce_terms).mean()
        sp = torch.stack(sp_terms).mean() if sp_terms else torch.zeros((), device=ce.device)
        loss = total_loss(ce, sp, sp_cfg.weight)
        if not torch.isfinite(loss):
            raise RuntimeError("training diverged")

        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append(float(loss.detach()))
        if train_cfg.log_every and (it + 1) % train_cfg.log_every == 0:
            recent = history[-train_cfg.log_every:]
            log.info("iter %d/%d lr %.2e loss %.4f", it + 1, train_cfg.iterations,
                     lr, sum(recent) / len(recent))

    net.eval()
    return Checkpoint.from_net(
        net,
        iteration=train_cfg.iterations,
        train_config=asdict(train_cfg),
        sim_config=sim_cfg,
        sp_config=sp_cfg,
        seed=train_cfg.seed,
        class_names=class_names,
        flip_pairs=flip_pairs,
        loss_history=history,
    )


def smoothed(history: list, window: int = 10) -> float:
    if not history:
        return math.nan
    tail = history[-window:]
    return sum(tail) / len(tail)
