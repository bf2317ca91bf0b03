"""Deterministic synthetic fixtures for desk-scale runs.

Provides a hand-built "bright center on dark border" cascade, synthetic
face patterns that the cascade detects, scene frames with planted
patterns, and an on-disk face corpus generator. Everything is seeded, so
scenario runs and demos reproduce exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imaging import save_gray
from .vision import (
    CascadeModel,
    CascadeStage,
    HaarFeature,
    HaarRect,
    WeakClassifier,
)

PATTERN_SIZE = 24
_BORDER = 6  # dark ring width around the bright center


def center_bright_cascade(base: int = PATTERN_SIZE) -> CascadeModel:
    """Two-stage cascade accepting windows whose center outshines the border.

    Stage features compare twice the center-rectangle sum against the full
    window sum; with the window-area normalization a flat background scores
    negative while a planted pattern scores well above the stump threshold.
    """
    b = _BORDER * base // PATTERN_SIZE
    center = base - 2 * b
    full = HaarRect(0, 0, base, base, -1.0)
    wide = HaarFeature((full, HaarRect(b, b, center, center, 2.0)))
    tight_b = b + center // 4
    tight = base - 2 * tight_b
    narrow = HaarFeature((full, HaarRect(tight_b, tight_b, tight, tight, 6.0)))
    return CascadeModel(
        base_width=base,
        base_height=base,
        stages=(
            CascadeStage(
                classifiers=(WeakClassifier(wide, threshold=30.0, left_value=0.0, right_value=1.0),),
                stage_threshold=1.0,
            ),
            CascadeStage(
                classifiers=(WeakClassifier(narrow, threshold=10.0, left_value=0.0, right_value=1.0),),
                stage_threshold=1.0,
            ),
        ),
    )


def face_pattern(rng: np.random.Generator, size: int = PATTERN_SIZE) -> np.ndarray:
    """One class base pattern: dark ring, bright textured center."""
    img = np.full((size, size), 10, dtype=np.uint8)
    b = _BORDER * size // PATTERN_SIZE
    center = rng.integers(170, 256, size=(size - 2 * b, size - 2 * b))
    img[b:-b, b:-b] = center
    return img


def noisy_sample(
    pattern: np.ndarray, rng: np.random.Generator, sigma: float = 5.0
) -> np.ndarray:
    noisy = pattern.astype(np.float64) + rng.normal(0.0, sigma, pattern.shape)
    return np.round(noisy).clip(0, 255).astype(np.uint8)


def write_face_corpus(
    corpus_dir: str | Path,
    labels: list[str],
    per_class: int = 5,
    seed: int = 7,
    size: int = PATTERN_SIZE,
    sigma: float = 5.0,
) -> dict[str, np.ndarray]:
    """Directory-per-class corpus of noisy pattern samples; returns the
    clean base pattern per label."""
    rng = np.random.default_rng(seed)
    root = Path(corpus_dir)
    patterns = {}
    for label in labels:
        patterns[label] = face_pattern(rng, size)
        class_dir = root / label
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            save_gray(noisy_sample(patterns[label], rng, sigma), class_dir / f"{i:02d}.png")
    return patterns


def scene_with_pattern(
    pattern: np.ndarray,
    scene_size: int = 128,
    position: tuple[int, int] = (40, 40),
    background: int = 20,
) -> np.ndarray:
    """Scene frame with the pattern planted at (x, y)."""
    scene = np.full((scene_size, scene_size), background, dtype=np.uint8)
    x, y = position
    h, w = pattern.shape
    scene[y: y + h, x: x + w] = pattern
    return scene


def blank_scene(scene_size: int = 128, background: int = 20) -> np.ndarray:
    return np.full((scene_size, scene_size), background, dtype=np.uint8)


def write_frame_sequence(
    frame_dir: str | Path, frames: list[np.ndarray]
) -> list[Path]:
    """Frame playback directory for the controller's scripted camera."""
    root = Path(frame_dir)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(frames):
        p = root / f"frame-{i:04d}.png"
        save_gray(frame, p)
        paths.append(p)
    return paths
