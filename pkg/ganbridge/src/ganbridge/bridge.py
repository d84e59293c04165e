"""Training and inference over paired datasets emitted by the posegap
factory. The dataset contract is consumed as-is: a manifest.json of kind
"paired" whose records point at source/target PNGs relative to the
manifest directory."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError
from torch import nn
from torch.utils.data import DataLoader, TensorDataset

from .model import PatchDiscriminator, UNetGenerator

L1_WEIGHT = 100.0


class BridgeError(ValueError):
    pass


class IncompatibleManifest(BridgeError):
    pass


class InsufficientData(BridgeError):
    pass


class MissingCheckpoint(BridgeError):
    pass


class DecodeError(BridgeError):
    pass


@dataclass(frozen=True)
class BridgeConfig:
    manifest_path: str
    image_size: int = 64
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 2e-4
    checkpoint_dir: str = "checkpoints"
    seed: int = 0

    def __post_init__(self):
        s = self.image_size
        if s < 32 or (s & (s - 1)) != 0:
            raise BridgeError(f"image_size {s} must be a power of two >= 32")
        if self.epochs < 0:
            raise BridgeError("epochs must be >= 0")
        if self.batch_size < 1:
            raise BridgeError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise BridgeError("learning_rate must be positive")


@dataclass
class TrainResult:
    checkpoint_path: Path
    history_path: Path
    history: list = field(default_factory=list)  # per-epoch mean L1


def _load_image_tensor(path: Path, size: int) -> torch.Tensor:
    """PNG -> float tensor (3, size, size) in [-1, 1]."""
    try:
        with Image.open(path) as im:
            img = im.convert("RGB").resize((size, size), Image.BILINEAR)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    arr = np.asarray(img, dtype=np.float32) / 127.5 - 1.0
    return torch.from_numpy(arr).permute(2, 0, 1)


def load_pairs(manifest_path, image_size: int, min_samples: int = 32):
    """Load a paired manifest into (source, target) tensor stacks."""
    path = Path(manifest_path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path) as fh:
        manifest = json.load(fh)
    kind = manifest.get("dataset_kind")
    if kind != "paired":
        raise IncompatibleManifest(
            f"{path}: dataset_kind {kind!r}, need 'paired'")
    records = manifest.get("records", [])
    if len(records) < min_samples:
        raise InsufficientData(
            f"{path}: {len(records)} samples, need >= {min_samples}")
    root = path.parent
    sources = torch.stack([_load_image_tensor(root / r["source"], image_size)
                           for r in records])
    targets = torch.stack([_load_image_tensor(root / r["target"], image_size)
                           for r in records])
    return sources, targets


def _save_checkpoint(generator: UNetGenerator, cfg: BridgeConfig,
                     epochs_trained: int) -> Path:
    out = Path(cfg.checkpoint_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "generator.pt"
    torch.save({"generator": generator.state_dict(),
                "image_size": cfg.image_size,
                "epochs_trained": epochs_trained}, path)
    return path


def _write_history(history, cfg: BridgeConfig) -> Path:
    path = Path(cfg.checkpoint_dir) / "loss_history.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_l1"])
        for epoch, value in enumerate(history, start=1):
            writer.writerow([epoch, f"{value:.6f}"])
    return path


def train_translator(cfg: BridgeConfig) -> TrainResult:
    """Adversarial + L1 training; returns the checkpoint and per-epoch mean
    L1 reconstruction losses (also written as CSV next to the checkpoint)."""
    torch.manual_seed(cfg.seed)
    sources, targets = load_pairs(cfg.manifest_path, cfg.image_size)
    loader = DataLoader(TensorDataset(sources, targets),
                        batch_size=cfg.batch_size, shuffle=True,
                        generator=torch.Generator().manual_seed(cfg.seed))

    generator = UNetGenerator()
    discriminator = PatchDiscriminator()
    opt_g = torch.optim.Adam(generator.parameters(), lr=cfg.learning_rate,
                             betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=cfg.learning_rate,
                             betas=(0.5, 0.999))
    bce = nn.BCEWithLogitsLoss()
    l1 = nn.L1Loss()

    history = []
    for _ in range(cfg.epochs):
        epoch_l1 = 0.0
        seen = 0
        for src, tgt in loader:
            fake = generator(src)

            opt_d.zero_grad()
            real_logits = discriminator(src, tgt)
            fake_logits = discriminator(src, fake.detach())
            loss_d = 0.5 * (bce(real_logits, torch.ones_like(real_logits))
                            + bce(fake_logits, torch.zeros_like(fake_logits)))
            loss_d.backward()
            opt_d.step()

            opt_g.zero_grad()
            adv_logits = discriminator(src, fake)
            recon = l1(fake, tgt)
            loss_g = bce(adv_logits, torch.ones_like(adv_logits)) \
                + L1_WEIGHT * recon
            loss_g.backward()
            opt_g.step()

            epoch_l1 += recon.item() * src.shape[0]
            seen += src.shape[0]
        history.append(epoch_l1 / seen)

    checkpoint = _save_checkpoint(generator, cfg, cfg.epochs)
    history_path = _write_history(history, cfg)
    return TrainResult(checkpoint_path=checkpoint, history_path=history_path,
                       history=history)


def load_generator(checkpoint_path):
    path = Path(checkpoint_path)
    if not path.exists():
        raise MissingCheckpoint(str(path))
    state = torch.load(path, map_location="cpu", weights_only=True)
    generator = UNetGenerator()
    generator.load_state_dict(state["generator"])
    generator.eval()
    return generator, int(state["image_size"])


def adapt_images(checkpoint_path, source_dir, out_dir) -> int:
    """Translate every PNG under source_dir, preserving filenames and
    original dimensions; returns the number of images written."""
    generator, image_size = load_generator(checkpoint_path)
    src = Path(source_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    with torch.no_grad():
        for path in sorted(src.glob("*.png")):
            try:
                with Image.open(path) as im:
                    original = im.convert("RGB")
                    width, height = original.size
            except (UnidentifiedImageError, OSError, SyntaxError) as exc:
                raise DecodeError(f"{path}: {exc}") from exc
            small = original.resize((image_size, image_size), Image.BILINEAR)
            arr = np.asarray(small, dtype=np.float32) / 127.5 - 1.0
            tensor = torch.from_numpy(arr).permute(2, 0, 1)[None]
            fake = generator(tensor)[0].permute(1, 2, 0).numpy()
            pixels = np.clip((fake + 1.0) * 127.5 + 0.5, 0, 255).astype(np.uint8)
            result = Image.fromarray(pixels).resize((width, height),
                                                    Image.BILINEAR)
            result.save(out / path.name)
            count += 1
    return count
