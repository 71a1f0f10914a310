"""Segmentation network: a compact fully-convolutional encoder-decoder.

The stem consumes 3 RGB channels plus one localization map per class through
a 7x7 convolution; the last encoder stage uses dilated convolutions; the
decoder upsamples with skip connections and exposes an embedding at stride 4
for the semantic-perceiving loss, alongside full-resolution logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .clicks import ClickSet, encode_clicks, assemble_input
from .geometry import LabelMask


@dataclass
class ModelConfig:
    num_classes: int             # C + 1, background included
    base_channels: int = 32
    depth: int = 3               # encoder stages, stride 2 each
    stem_kernel: int = 7
    embed_dim: int = 32
    crop_size: int = 64          # training crop; inference is any size

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.depth < 2:
            raise ValueError("depth must be >= 2 (the feature tap sits at stride 4)")
        if self.stem_kernel % 2 == 0:
            raise ValueError("stem_kernel must be odd")

    @property
    def input_channels(self) -> int:
        return 3 + self.num_classes


def _norm(ch: int) -> nn.Module:
    groups = 8
    while ch % groups:
        groups //= 2
    return nn.GroupNorm(groups, ch)


def _block(cin: int, cout: int, stride: int = 1, dilation: int = 1) -> nn.Sequential:
    pad = dilation
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=pad, dilation=dilation),
        _norm(cout),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=pad, dilation=dilation),
        _norm(cout),
        nn.ReLU(inplace=True),
    )


class SegNet(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        b = cfg.base_channels
        widths = [min(b * (2 ** i), b * 8) for i in range(cfg.depth + 1)]
        self.stem = nn.Sequential(
            nn.Conv2d(cfg.input_channels, b, cfg.stem_kernel, padding=cfg.stem_kernel // 2),
            _norm(b),
            nn.ReLU(inplace=True),
        )
        self.encoder = nn.ModuleList()
        for i in range(cfg.depth):
            dilation = 2 if i == cfg.depth - 1 else 1
            self.encoder.append(_block(widths[i], widths[i + 1], stride=2, dilation=dilation))
        self.decoder = nn.ModuleList()
        for i in reversed(range(cfg.depth)):
            self.decoder.append(_block(widths[i + 1] + widths[i], widths[i]))
        self.sp_head = nn.Conv2d(widths[2], cfg.embed_dim, 1)  # stride-4 decoder level
        self.head = nn.Conv2d(widths[0], cfg.num_classes, 1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, C+4, H, W) -> logits (B, C+1, H, W), features (B, D, ceil(H/4), ceil(W/4))."""
        if x.ndim != 4 or x.shape[1] != self.cfg.input_channels:
            raise ValueError(
                f"expected {self.cfg.input_channels} input channels, got {tuple(x.shape)}"
            )
        skips = [self.stem(x)]
        h = skips[0]
        for enc in self.encoder:
            h = enc(h)
            skips.append(h)
        # decoder block i emits stride 2^(depth-1-i); the tap wants stride 4
        tap_index = self.cfg.depth - 3
        sp_feat = self.sp_head(h) if tap_index < 0 else None
        for i, dec in enumerate(self.decoder):
            skip = skips[self.cfg.depth - 1 - i]
            h = F.interpolate(h, size=skip.shape[-2:], mode="bilinear", align_corners=False)
            h = dec(torch.cat([h, skip], dim=1))
            if i == tap_index:
                sp_feat = self.sp_head(h)
        logits = self.head(h)
        return logits, sp_feat


def build_input(image: np.ndarray, clicks: ClickSet, num_classes: int) -> np.ndarray:
    maps = encode_clicks(clicks, image.shape[0], image.shape[1], num_classes)
    return assemble_input(image, maps)


class Predictor:
    """Inference wrapper: argmax parsing from an image and a click set."""

    def __init__(self, net: SegNet, device: str = "cpu"):
        self.net = net.to(device).eval()
        self.cfg = net.cfg
        self.device = device

    @torch.no_grad()
    def predict(self, image: np.ndarray, clicks: ClickSet) -> LabelMask:
        x = torch.from_numpy(build_input(image, clicks, self.cfg.num_classes))
        logits, _ = self.net(x.unsqueeze(0).to(self.device))
        labels = logits.argmax(dim=1)[0].cpu().numpy()
        return LabelMask(labels, self.cfg.num_classes)

    @torch.no_grad()
    def predict_batch(self, images: list, clicksets: list) -> list:
        """Batched variant for same-size images."""
        xs = [torch.from_numpy(build_input(im, cl, self.cfg.num_classes))
              for im, cl in zip(images, clicksets)]
        logits, _ = self.net(torch.stack(xs).to(self.device))
        labels = logits.argmax(dim=1).cpu().numpy()
        return [LabelMask(lab, self.cfg.num_classes) for lab in labels]
