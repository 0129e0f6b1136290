"""Datasets: CIFAR-10 binary batches, synthetic image sets, preprocessing."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

CIFAR_RECORD = 1 + 3 * 32 * 32
CIFAR_SHAPE = (3, 32, 32)


@dataclass
class LabeledImageSet:
    images: np.ndarray  # (N, C, H, W)
    labels: np.ndarray  # (N,)
    class_count: int
    provenance: str = ""

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or len(self.images) != len(self.labels):
            raise ValueError("images must be (N, C, H, W) with one label per image")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError("labels outside [0, class_count)")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx, provenance: str | None = None) -> "LabeledImageSet":
        return LabeledImageSet(self.images[idx], self.labels[idx], self.class_count,
                               self.provenance if provenance is None else provenance)

    def astype(self, dtype) -> "LabeledImageSet":
        return LabeledImageSet(self.images.astype(dtype), self.labels, self.class_count,
                               self.provenance)


# ---------------------------------------------------------------------------
# CIFAR-10 binary layout: 3073-byte records, label byte then CHW pixels


def parse_cifar_bytes(data: bytes, provenance: str = "cifar10") -> LabeledImageSet:
    if len(data) == 0 or len(data) % CIFAR_RECORD:
        raise ValueError(f"truncated CIFAR-10 data: {len(data)} bytes is not a multiple "
                         f"of {CIFAR_RECORD}")
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    if labels.max() >= 10:
        raise ValueError(f"label {labels.max()} >= 10 in CIFAR-10 data")
    images = records[:, 1:].reshape(-1, *CIFAR_SHAPE).astype(np.float32) / 255.0
    return LabeledImageSet(images, labels, 10, provenance)


def load_cifar_binary(path) -> LabeledImageSet:
    """Load one batch file, a list of them, or every ``*.bin`` batch in a directory.

    A directory yields the five ``data_batch_*.bin`` training files when present.
    """
    if isinstance(path, (str, Path)):
        path = Path(path)
        if path.is_dir():
            files = sorted(path.glob("data_batch_*.bin")) or sorted(path.glob("*.bin"))
        else:
            files = [path]
    else:
        files = [Path(p) for p in path]
    if not files:
        raise FileNotFoundError(f"no CIFAR-10 batch files under {path}")
    return parse_cifar_bytes(b"".join(f.read_bytes() for f in files),
                             provenance="cifar10:" + ",".join(f.name for f in files))


def to_cifar_bytes(dataset: LabeledImageSet) -> bytes:
    """Serialize to the CIFAR-10 record layout; pixels in [0, 1] become bytes."""
    if dataset.images.shape[1:] != CIFAR_SHAPE:
        raise ValueError(f"CIFAR-10 records need {CIFAR_SHAPE} images")
    if dataset.class_count > 256:
        raise ValueError("labels must fit in one byte")
    pix = np.clip(np.rint(dataset.images * 255.0), 0, 255).astype(np.uint8)
    out = np.empty((len(dataset), CIFAR_RECORD), dtype=np.uint8)
    out[:, 0] = dataset.labels
    out[:, 1:] = pix.reshape(len(dataset), -1)
    return out.tobytes()


def svhn_from_arrays(images: np.ndarray, labels: np.ndarray) -> LabeledImageSet:
    """Convert SVHN ``.mat`` arrays into a set.

    ``images`` is the ``X`` array as stored in the format-2 files, uint8 of shape
    ``(32, 32, 3, N)``; ``labels`` is ``y`` with digit 0 encoded as 10. Pixels are
    divided by 255 and no other preprocessing is applied.
    """
    images = np.asarray(images)
    if images.ndim != 4 or images.shape[:3] != (32, 32, 3):
        raise ValueError("expected SVHN X array of shape (32, 32, 3, N)")
    x = images.transpose(3, 2, 0, 1).astype(np.float32) / 255.0
    y = np.asarray(labels).reshape(-1).astype(np.int64) % 10
    return LabeledImageSet(x, y, 10, "svhn")


# ---------------------------------------------------------------------------
# synthetic data


def class_templates(class_count: int, image_size: int, channels: int = 3,
                    seed: int = 0) -> np.ndarray:
    """Distinct per-class patterns: an oriented grating plus a colored blob."""
    rng = np.random.default_rng([seed, 7919])
    yy, xx = np.mgrid[0:image_size, 0:image_size] / image_size
    out = np.empty((class_count, channels, image_size, image_size))
    for c in range(class_count):
        theta = np.pi * c / class_count
        freq = 1.0 + (c % 3)
        grating = np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta))
                         + rng.uniform(0, 2 * np.pi))
        cy, cx = rng.uniform(0.2, 0.8, size=2)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 0.02)
        color = rng.uniform(-1, 1, size=channels)
        for ch in range(channels):
            out[c, ch] = 0.5 * grating * (1 if ch % 2 == 0 else -1) + color[ch] * blob
    return out


def synthesize_dataset(class_count: int, n: int, image_size: int, seed: int,
                       channels: int = 3, noise: float = 0.35, max_shift: int = 1) -> LabeledImageSet:
    """Class-conditional images: template, random amplitude and shift, Gaussian noise.

    Labels are balanced (``arange(n) % class_count``, shuffled). Pixel values
    are centred around 0.5 and not clipped.
    """
    rng = np.random.default_rng([seed, 1])
    templates = class_templates(class_count, image_size, channels, seed)
    labels = rng.permutation(np.arange(n) % class_count)
    amp = rng.uniform(0.8, 1.2, size=n)
    shifts = rng.integers(-max_shift, max_shift + 1, size=(n, 2)) if max_shift else np.zeros((n, 2), int)
    images = np.empty((n, channels, image_size, image_size), dtype=np.float32)
    for i in range(n):
        img = np.roll(templates[labels[i]], tuple(shifts[i]), axis=(1, 2))
        images[i] = 0.5 + 0.25 * amp[i] * img
    if noise:
        images += (noise * rng.standard_normal(images.shape)).astype(np.float32)
    return LabeledImageSet(images, labels, class_count,
                           f"synthetic:classes={class_count},n={n},size={image_size},seed={seed}")


def parse_dataset_ref(ref: str) -> LabeledImageSet:
    """``synthetic:classes=10,n=1000,size=16,seed=0[,noise=..]`` or a CIFAR-10 path."""
    if not ref.startswith("synthetic"):
        return load_cifar_binary(ref)
    opts = {"classes": "10", "n": "1000", "size": "16", "seed": "0"}
    body = ref.partition(":")[2]
    for item in filter(None, body.split(",")):
        key, _, value = item.partition("=")
        opts[key.strip()] = value.strip()
    extra = {}
    if "noise" in opts:
        extra["noise"] = float(opts.pop("noise"))
    if "channels" in opts:
        extra["channels"] = int(opts.pop("channels"))
    if "shift" in opts:
        extra["max_shift"] = int(opts.pop("shift"))
    unknown = set(opts) - {"classes", "n", "size", "seed"}
    if unknown:
        raise ValueError(f"unknown synthetic dataset options {sorted(unknown)}")
    return synthesize_dataset(int(opts["classes"]), int(opts["n"]), int(opts["size"]),
                              int(opts["seed"]), **extra)


# ---------------------------------------------------------------------------
# preprocessing


def crop_flip(image: np.ndarray, offset: tuple[int, int], flip: bool, pad: int = 4) -> np.ndarray:
    """Zero-pad by ``pad``, crop back to size at ``offset``, optionally mirror horizontally."""
    c, h, w = image.shape
    padded = np.pad(image, ((0, 0), (pad, pad), (pad, pad)))
    oy, ox = offset
    out = padded[:, oy:oy + h, ox:ox + w]
    return out[:, :, ::-1].copy() if flip else out.copy()


def augment(batch: np.ndarray, rng: np.random.Generator, pad: int = 4) -> np.ndarray:
    """Pad-4 random crop and horizontal flip with probability 0.5, per image."""
    if batch.shape[2] != batch.shape[3]:
        raise ValueError("augmentation expects square images")
    n = len(batch)
    offsets = rng.integers(0, 2 * pad + 1, size=(n, 2))
    flips = rng.random(n) < 0.5
    return np.stack([crop_flip(batch[i], tuple(offsets[i]), bool(flips[i]), pad)
                     for i in range(n)]) if n else batch.copy()


def channel_stats(dataset: LabeledImageSet) -> tuple[np.ndarray, np.ndarray]:
    x = dataset.images.astype(np.float64)
    return x.mean(axis=(0, 2, 3)), x.std(axis=(0, 2, 3))


def apply_normalization(dataset: LabeledImageSet, mean, std) -> LabeledImageSet:
    mean = np.asarray(mean, dtype=np.float64)[None, :, None, None]
    std = np.asarray(std, dtype=np.float64)[None, :, None, None]
    images = ((dataset.images.astype(np.float64) - mean) / std).astype(dataset.images.dtype)
    return LabeledImageSet(images, dataset.labels, dataset.class_count, dataset.provenance)


def normalize(dataset: LabeledImageSet):
    """Standardize each channel; returns the set and the ``(mean, std)`` used."""
    if len(dataset) == 0:
        raise ValueError("cannot normalize an empty set")
    mean, std = channel_stats(dataset)
    flat = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if np.any(flat):
        raise ValueError(f"zero-variance channel(s): {np.flatnonzero(flat).tolist()}")
    return apply_normalization(dataset, mean, std), (mean, std)


def split_validation(dataset: LabeledImageSet, n_val: int = 5000, seed: int = 0):
    """Random disjoint ``(train, val)`` split with ``n_val`` validation images."""
    if not 0 < n_val < len(dataset):
        raise ValueError(f"n_val={n_val} must lie in (0, {len(dataset)})")
    perm = np.random.default_rng([seed, 5000]).permutation(len(dataset))
    val_idx, train_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    return dataset.subset(train_idx), dataset.subset(val_idx)


def concat_sets(sets: Iterable[LabeledImageSet]) -> LabeledImageSet:
    sets = list(sets)
    return LabeledImageSet(np.concatenate([s.images for s in sets]),
                           np.concatenate([s.labels for s in sets]),
                           sets[0].class_count, "+".join(s.provenance for s in sets))
