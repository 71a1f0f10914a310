"""Interactive evaluation protocol and metrics.

Initialization places one max-margin click per ground-truth part component
(background gets none); each correction round adds one click inside the
largest wrongly labeled region, labeled with the ground truth there.
Dataset-level rounds are synchronized: every still-erroneous image receives
one click per round until the mean mIoU crosses the parsing standard or the
round cap is hit.

Metrics: per-class IoU and its mean, boundary F1 inside a 5-pixel band
around ground-truth inter-class edges, correction clicks per image to reach
the standard, and total clicks per ground-truth class occurrence.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .clicks import Click, ClickSet
from .geometry import (
    LabelMask,
    connected_components,
    distance_to_set,
    interclass_boundary_pixels,
)
from .simulate import central_click

BOUNDARY_BAND = 5.0


@dataclass
class ProtocolConfig:
    parsing_standard: float = 0.90   # stop once mean mIoU reaches this
    max_rounds: int = 15
    candidates: int = 5
    rgb_only_init: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.parsing_standard <= 1:
            raise ValueError("parsing_standard must be in (0, 1]")
        if self.candidates < 1:
            raise ValueError("candidates must be >= 1")


@dataclass
class SessionTrace:
    sample_id: str
    clicks: ClickSet
    round_masks: list = field(default_factory=list)   # LabelMask per round
    round_miou: list = field(default_factory=list)
    clicks_per_round: list = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.round_masks)


@dataclass
class EvalReport:
    mean_miou_per_round: list
    per_class_iou: dict
    boundary_f1: float
    add_clicks: float            # correction rounds to the standard (per image)
    avg_clicks: float            # total clicks / class occurrences
    reached_standard: bool
    rounds_to_standard: int | None
    parsing_standard: float
    max_rounds: int
    num_images: int
    total_clicks: int
    init_clicks: int
    class_occurrences: int
    seed: int

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and math.isnan(v):
                return None
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, list):
                return [clean(x) for x in v]
            return v

        payload = {k: clean(v) for k, v in self.__dict__.items()}
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _session_rng(seed: int, sample_id: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(zlib.crc32(sample_id.encode()),))
    )


def init_clicks(gt: LabelMask, rng: np.random.Generator, candidates: int = 5,
                record: dict | None = None) -> ClickSet:
    """One click per part component: the best of ``candidates`` uniformly
    sampled component pixels by distance to the component boundary. No
    background click."""
    clicks = ClickSet()
    for class_id in range(1, gt.num_classes):
        for comp in connected_components(gt, class_id):
            rec = [] if record is not None else None
            clicks.add(central_click(comp, candidates, rng, phase="init", record=rec))
            if record is not None:
                record[(class_id, comp.min_pixel)] = rec
    return clicks


def _error_regions(pred: LabelMask, gt: LabelMask):
    """Error components split by ground-truth class, as PartComponents with
    the gt class id."""
    wrong = pred.labels != gt.labels
    if not wrong.any():
        return []
    regions = []
    for class_id in np.unique(gt.labels[wrong]):
        sub = LabelMask((wrong & (gt.labels == class_id)).astype(np.int64), 2)
        for comp in connected_components(sub, 1):
            comp.class_id = int(class_id)
            regions.append(comp)
    regions.sort(key=lambda c: (-c.area, c.min_pixel))
    return regions


def correction_click(pred: LabelMask, gt: LabelMask, rng: np.random.Generator,
                     candidates: int = 5, round_index: int = 0,
                     record: list | None = None) -> Click | None:
    """Max-margin click inside the largest wrongly labeled region, labeled
    with the ground truth there; None when prediction equals ground truth."""
    regions = _error_regions(pred, gt)
    if not regions:
        return None
    click = central_click(regions[0], candidates, rng, phase="correction", record=record)
    return Click(click.row, click.col, click.class_id, phase="correction", round=round_index)


def miou(pred: LabelMask, gt: LabelMask, num_classes: int | None = None) -> tuple[list, float]:
    """Per-class IoU (nan where the union is empty) and the mean over classes
    present in ground truth or prediction."""
    n = num_classes or gt.num_classes
    per_class = []
    total, count = 0.0, 0
    for c in range(n):
        p = pred.labels == c
        g = gt.labels == c
        union = int(np.logical_or(p, g).sum())
        if union == 0:
            per_class.append(math.nan)
            continue
        iou = int(np.logical_and(p, g).sum()) / union
        per_class.append(iou)
        total += iou
        count += 1
    return per_class, total / count if count else math.nan


def boundary_f1(pred: LabelMask, gt: LabelMask, band: float = BOUNDARY_BAND) -> float:
    """Mean per-class F1 restricted to pixels within ``band`` of a
    ground-truth inter-class boundary; 1.0 when the mask has no boundary."""
    edges = interclass_boundary_pixels(gt)
    if edges.shape[0] == 0:
        return 1.0
    dist = distance_to_set(gt.height, gt.width, edges).values
    in_band = dist <= band
    pred_band = pred.labels[in_band]
    gt_band = gt.labels[in_band]
    scores = []
    for c in range(gt.num_classes):
        p = pred_band == c
        g = gt_band == c
        if not (p.any() or g.any()):
            continue
        tp = int(np.logical_and(p, g).sum())
        fp = int(p.sum()) - tp
        fn = int(g.sum()) - tp
        scores.append(2 * tp / (2 * tp + fp + fn))
    return sum(scores) / len(scores) if scores else 1.0


def run_session(predictor, sample, cfg: ProtocolConfig,
                rng: np.random.Generator | None = None) -> SessionTrace:
    """One interactive episode on one sample, recording every round."""
    if rng is None:
        rng = _session_rng(cfg.seed, sample.id)
    gt = sample.mask
    clicks = ClickSet() if cfg.rgb_only_init else init_clicks(gt, rng, cfg.candidates)
    trace = SessionTrace(sample_id=sample.id, clicks=clicks)

    pred = predictor.predict(sample.image, clicks)
    trace.round_masks.append(pred)
    trace.round_miou.append(miou(pred, gt)[1])
    trace.clicks_per_round.append(len(clicks))

    for round_index in range(1, cfg.max_rounds + 1):
        click = correction_click(pred, gt, rng, cfg.candidates, round_index)
        if click is None:
            break
        clicks.add(click)
        pred = predictor.predict(sample.image, clicks)
        trace.round_masks.append(pred)
        trace.round_miou.append(miou(pred, gt)[1])
        trace.clicks_per_round.append(len(clicks))
    return trace


def evaluate(predictor, dataset: list, cfg: ProtocolConfig,
             keep_traces: bool = False, batch_size: int = 32):
    """Dataset-wide synchronized protocol; returns an EvalReport (and the
    per-image traces when ``keep_traces``)."""
    if not dataset:
        raise ValueError("dataset is empty")
    rngs = {s.id: _session_rng(cfg.seed, s.id) for s in dataset}
    clicksets = {}
    for s in dataset:
        clicksets[s.id] = (ClickSet() if cfg.rgb_only_init
                           else init_clicks(s.mask, rngs[s.id], cfg.candidates))
    init_total = sum(len(c) for c in clicksets.values())

    def predict_all(targets):
        if hasattr(predictor, "predict_batch"):
            preds = []
            for i in range(0, len(targets), batch_size):
                chunk = targets[i:i + batch_size]
                preds.extend(predictor.predict_batch(
                    [s.image for s in chunk], [clicksets[s.id] for s in chunk]))
            return preds
        return [predictor.predict(s.image, clicksets[s.id]) for s in targets]

    preds = {s.id: p for s, p in zip(dataset, predict_all(dataset))}
    traces = {s.id: SessionTrace(sample_id=s.id, clicks=clicksets[s.id]) for s in dataset}

    def record_round():
        vals = []
        for s in dataset:
            score = miou(preds[s.id], s.mask)[1]
            traces[s.id].round_masks.append(preds[s.id])
            traces[s.id].round_miou.append(score)
            traces[s.id].clicks_per_round.append(len(clicksets[s.id]))
            vals.append(score)
        return sum(vals) / len(vals)

    mean_per_round = [record_round()]
    rounds_to_standard = 0 if mean_per_round[0] >= cfg.parsing_standard else None

    executed = 0
    while rounds_to_standard is None and executed < cfg.max_rounds:
        executed += 1
        touched = []
        for s in dataset:
            click = correction_click(preds[s.id], s.mask, rngs[s.id],
                                     cfg.candidates, round_index=executed)
            if click is not None:
                clicksets[s.id].add(click)
                touched.append(s)
        if not touched:
            # every image already perfect; the mean cannot move
            break
        for s, p in zip(touched, predict_all(touched)):
            preds[s.id] = p
        mean_per_round.append(record_round())
        if mean_per_round[-1] >= cfg.parsing_standard:
            rounds_to_standard = executed

    reached = rounds_to_standard is not None
    stop_round = rounds_to_standard if reached else executed
    total_clicks = sum(len(clicksets[s.id]) for s in dataset)
    occurrences = sum(len(s.mask.present_classes()) for s in dataset)

    per_class_sums = np.zeros(dataset[0].mask.num_classes)
    per_class_counts = np.zeros(dataset[0].mask.num_classes)
    bf1 = []
    for s in dataset:
        per_class, _ = miou(preds[s.id], s.mask)
        for c, v in enumerate(per_class):
            if not math.isnan(v):
                per_class_sums[c] += v
                per_class_counts[c] += 1
        bf1.append(boundary_f1(preds[s.id], s.mask))
    per_class_iou = {
        str(c): (per_class_sums[c] / per_class_counts[c] if per_class_counts[c] else math.nan)
        for c in range(dataset[0].mask.num_classes)
    }

    report = EvalReport(
        mean_miou_per_round=mean_per_round,
        per_class_iou=per_class_iou,
        boundary_f1=sum(bf1) / len(bf1),
        add_clicks=float(stop_round),
        avg_clicks=total_clicks / occurrences,
        reached_standard=reached,
        rounds_to_standard=rounds_to_standard,
        parsing_standard=cfg.parsing_standard,
        max_rounds=cfg.max_rounds,
        num_images=len(dataset),
        total_clicks=total_clicks,
        init_clicks=init_total,
        class_occurrences=occurrences,
        seed=cfg.seed,
    )
    if keep_traces:
        return report, list(traces.values())
    return report
