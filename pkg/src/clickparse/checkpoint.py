"""Checkpoint archive: a zip holding a JSON manifest plus one raw binary blob
per named weight tensor (32-bit little-endian floats, C order). Nothing in
the format depends on the training framework.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch

from .losses import SPLossConfig
from .model import ModelConfig, SegNet
from .simulate import SimulationConfig

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model_config: ModelConfig
    arrays: dict                 # name -> float32 ndarray
    iteration: int = 0
    train_config: dict | None = None
    sim_config: SimulationConfig | None = None
    sp_config: SPLossConfig | None = None
    seed: int | None = None
    class_names: list | None = None
    flip_pairs: list | None = None
    loss_history: list | None = None

    def build_net(self) -> SegNet:
        net = SegNet(self.model_config)
        state = {k: torch.from_numpy(v.copy()) for k, v in self.arrays.items()}
        net.load_state_dict(state)
        return net

    @classmethod
    def from_net(cls, net: SegNet, **kwargs) -> "Checkpoint":
        arrays = {
            k: v.detach().cpu().numpy().astype(np.float32)
            for k, v in net.state_dict().items()
        }
        return cls(model_config=net.cfg, arrays=arrays, **kwargs)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    manifest = {
        "format_version": FORMAT_VERSION,
        "iteration": ckpt.iteration,
        "seed": ckpt.seed,
        "model_config": asdict(ckpt.model_config),
        "train_config": ckpt.train_config,
        "sim_config": asdict(ckpt.sim_config) if ckpt.sim_config else None,
        "sp_config": asdict(ckpt.sp_config) if ckpt.sp_config else None,
        "class_names": ckpt.class_names,
        "flip_pairs": ckpt.flip_pairs,
        "loss_history": ckpt.loss_history,
        "arrays": [
            {"name": k, "shape": list(v.shape), "dtype": "float32", "file": f"arrays/{i}.bin"}
            for i, (k, v) in enumerate(sorted(ckpt.arrays.items()))
        ],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        for i, (k, v) in enumerate(sorted(ckpt.arrays.items())):
            blob = np.ascontiguousarray(v, dtype="<f4").tobytes()
            zf.writestr(f"arrays/{i}.bin", blob)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} not found")
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format {manifest['format_version']}")
        arrays = {}
        for entry in manifest["arrays"]:
            raw = zf.read(entry["file"])
            arr = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).copy()
            arrays[entry["name"]] = arr
    sim = manifest.get("sim_config")
    sp = manifest.get("sp_config")
    return Checkpoint(
        model_config=ModelConfig(**manifest["model_config"]),
        arrays=arrays,
        iteration=manifest["iteration"],
        train_config=manifest.get("train_config"),
        sim_config=SimulationConfig(**sim) if sim else None,
        sp_config=SPLossConfig(**sp) if sp else None,
        seed=manifest.get("seed"),
        class_names=manifest.get("class_names"),
        flip_pairs=manifest.get("flip_pairs"),
        loss_history=manifest.get("loss_history"),
    )
