"""Integral-image arithmetic, Haar feature evaluation and cascade face detection.

All operations are pure functions over immutable inputs. Grayscale images
are 2-D integer numpy arrays (height, width); integral images are exact
int64 summed-area tables with a leading zero row/column.

Feature values are normalized by the scaled detection-window area, which
keeps the arithmetic exact on integer-scaled inputs. Cascade files must be
authored against this normalization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .imaging import validate_gray


class CascadeFileError(ValueError):
    """Malformed cascade file; message carries the position of the defect."""


@dataclass(frozen=True)
class HaarRect:
    x: int
    y: int
    w: int
    h: int
    weight: float


@dataclass(frozen=True)
class HaarFeature:
    """Weighted rectangle set; white regions carry positive weights, black negative."""

    rects: tuple[HaarRect, ...]

    def __post_init__(self):
        if len(self.rects) < 2:
            raise ValueError("a Haar feature needs at least 2 rectangles")


@dataclass(frozen=True)
class WeakClassifier:
    """Decision stump over a normalized Haar feature value."""

    feature: HaarFeature
    threshold: float
    left_value: float
    right_value: float


@dataclass(frozen=True)
class CascadeStage:
    classifiers: tuple[WeakClassifier, ...]
    stage_threshold: float

    def __post_init__(self):
        if len(self.classifiers) < 1:
            raise ValueError("a cascade stage needs at least 1 classifier")


@dataclass(frozen=True)
class CascadeModel:
    base_width: int = 24
    base_height: int = 24
    stages: tuple[CascadeStage, ...] = ()

    def __post_init__(self):
        if self.base_width < 4 or self.base_height < 4:
            raise ValueError("base window must be at least 4x4")
        if len(self.stages) < 1:
            raise ValueError("a cascade needs at least 1 stage")


@dataclass(frozen=True)
class FaceBox:
    x: int
    y: int
    w: int
    h: int
    neighbors: int = 1


@dataclass(frozen=True)
class WindowVerdict:
    accepted: bool
    rejected_at_stage: Optional[int] = None


@dataclass(frozen=True)
class DetectParams:
    scale_factor: float = 1.1
    step: int = 2
    min_size: Optional[int] = None
    max_size: Optional[int] = None
    min_neighbors: int = 3
    group_eps: float = 0.3

    def __post_init__(self):
        if self.scale_factor < 1.05:
            raise ValueError("scale_factor must be >= 1.05")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if self.min_neighbors < 0:
            raise ValueError("min_neighbors must be >= 0")


def integral_image(img: np.ndarray) -> np.ndarray:
    """Summed-area table: (h+1, w+1) int64, first row and column zero."""
    arr = validate_gray(img).astype(np.int64)
    ii = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1), dtype=np.int64)
    ii[1:, 1:] = arr.cumsum(axis=0).cumsum(axis=1)
    return ii


def rect_sum(ii: np.ndarray, x: int, y: int, w: int, h: int) -> int:
    """Exact pixel sum of the rectangle via 4 table lookups."""
    height, width = ii.shape[0] - 1, ii.shape[1] - 1
    if w < 0 or h < 0:
        raise ValueError(f"negative rectangle size {w}x{h}")
    if x < 0 or y < 0 or x + w > width or y + h > height:
        raise ValueError(
            f"rectangle ({x},{y},{w},{h}) out of bounds for {width}x{height} image"
        )
    if w == 0 or h == 0:
        return 0
    return int(ii[y + h, x + w] - ii[y, x + w] - ii[y + h, x] + ii[y, x])


def _scale_coord(v: float) -> int:
    """Round to nearest integer, ties toward zero."""
    if v >= 0:
        return math.ceil(v - 0.5)
    return math.floor(v + 0.5)


def scaled_window(base_width: int, base_height: int, scale: float) -> tuple[int, int]:
    return _scale_coord(base_width * scale), _scale_coord(base_height * scale)


def eval_haar_feature(
    ii: np.ndarray,
    feature: HaarFeature,
    wx: int,
    wy: int,
    scale: float,
    base_width: int = 24,
    base_height: int = 24,
) -> float:
    """Weighted rectangle-sum difference, normalized by the scaled window area."""
    win_w, win_h = scaled_window(base_width, base_height, scale)
    total = 0.0
    for r in feature.rects:
        rx = wx + _scale_coord(r.x * scale)
        ry = wy + _scale_coord(r.y * scale)
        rw = _scale_coord(r.w * scale)
        rh = _scale_coord(r.h * scale)
        total += r.weight * rect_sum(ii, rx, ry, rw, rh)
    return total / float(win_w * win_h)


def evaluate_window(
    ii: np.ndarray, cascade: CascadeModel, wx: int, wy: int, scale: float
) -> WindowVerdict:
    """Run every stage at (wx, wy); rejection short-circuits at the failing stage."""
    for idx, stage in enumerate(cascade.stages):
        acc = 0.0
        for clf in stage.classifiers:
            value = eval_haar_feature(
                ii, clf.feature, wx, wy, scale, cascade.base_width, cascade.base_height
            )
            acc += clf.left_value if value < clf.threshold else clf.right_value
        if acc < stage.stage_threshold:
            return WindowVerdict(accepted=False, rejected_at_stage=idx)
    return WindowVerdict(accepted=True)


def scan_scales(
    img_w: int, img_h: int, cascade: CascadeModel, params: DetectParams
) -> list[float]:
    """Deterministic scale pyramid: geometric in params.scale_factor."""
    min_size = params.min_size if params.min_size is not None else min(
        cascade.base_width, cascade.base_height
    )
    max_size = params.max_size if params.max_size is not None else min(img_w, img_h)
    scale = max(
        1.0,
        min_size / cascade.base_width,
        min_size / cascade.base_height,
    )
    scales = []
    while True:
        win_w, win_h = scaled_window(cascade.base_width, cascade.base_height, scale)
        if win_w > img_w or win_h > img_h or max(win_w, win_h) > max_size:
            break
        scales.append(scale)
        scale *= params.scale_factor
    return scales


def detect_faces(
    img: np.ndarray, cascade: CascadeModel, params: DetectParams = DetectParams()
) -> list[FaceBox]:
    """Multi-scale sliding-window detection; output sorted by (y, x, w).

    With min_neighbors=0 the raw accepted windows are returned ungrouped,
    matching an exhaustive per-window scan exactly.
    """
    arr = validate_gray(img)
    img_h, img_w = arr.shape
    ii = integral_image(arr)
    raw: list[FaceBox] = []
    for scale in scan_scales(img_w, img_h, cascade, params):
        win_w, win_h = scaled_window(cascade.base_width, cascade.base_height, scale)
        for wy in range(0, img_h - win_h + 1, params.step):
            for wx in range(0, img_w - win_w + 1, params.step):
                if evaluate_window(ii, cascade, wx, wy, scale).accepted:
                    raw.append(FaceBox(wx, wy, win_w, win_h))
    if params.min_neighbors == 0:
        return sorted(raw, key=lambda b: (b.y, b.x, b.w))
    merged = group_rectangles(raw, params.min_neighbors, params.group_eps)
    return sorted(merged, key=lambda b: (b.y, b.x, b.w))


def _similar(a: FaceBox, b: FaceBox, eps: float) -> bool:
    dx = eps * 0.5 * (a.w + b.w)
    dy = eps * 0.5 * (a.h + b.h)
    return (
        abs(a.x - b.x) <= dx
        and abs(a.y - b.y) <= dy
        and abs(a.w - b.w) <= dx
        and abs(a.h - b.h) <= dy
    )


def group_rectangles(
    raw: Sequence[FaceBox], min_neighbors: int, eps: float = 0.3
) -> list[FaceBox]:
    """Partition boxes into similarity classes; emit the average of each class
    with more than min_neighbors members."""
    n = len(raw)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _similar(raw[i], raw[j], eps):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri

    groups: dict[int, list[FaceBox]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(raw[i])

    out = []
    for members in groups.values():
        if len(members) <= min_neighbors:
            continue
        k = len(members)
        out.append(
            FaceBox(
                x=int(round(sum(b.x for b in members) / k)),
                y=int(round(sum(b.y for b in members) / k)),
                w=int(round(sum(b.w for b in members) / k)),
                h=int(round(sum(b.h for b in members) / k)),
                neighbors=k,
            )
        )
    return sorted(out, key=lambda b: (b.y, b.x, b.w))


# ---------------------------------------------------------------------------
# Cascade file format (JSON)

def cascade_to_dict(cascade: CascadeModel) -> dict:
    return {
        "base_width": cascade.base_width,
        "base_height": cascade.base_height,
        "stages": [
            {
                "stage_threshold": st.stage_threshold,
                "classifiers": [
                    {
                        "threshold": c.threshold,
                        "left_value": c.left_value,
                        "right_value": c.right_value,
                        "rects": [
                            {"x": r.x, "y": r.y, "w": r.w, "h": r.h, "weight": r.weight}
                            for r in c.feature.rects
                        ],
                    }
                    for c in st.classifiers
                ],
            }
            for st in cascade.stages
        ],
    }


def save_cascade(cascade: CascadeModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cascade_to_dict(cascade), indent=2))


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise CascadeFileError(f"missing field '{key}' at {where}")
    return obj[key]


def load_cascade(path: str | Path) -> CascadeModel:
    """Load a cascade file, rejecting malformed content with a positioned error."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CascadeFileError(
            f"{path}: invalid syntax at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    try:
        stages = []
        for si, st in enumerate(_require(doc, "stages", "$")):
            where = f"$.stages[{si}]"
            classifiers = []
            for ci, cl in enumerate(_require(st, "classifiers", where)):
                cwhere = f"{where}.classifiers[{ci}]"
                rects = tuple(
                    HaarRect(
                        int(_require(r, "x", f"{cwhere}.rects[{ri}]")),
                        int(_require(r, "y", f"{cwhere}.rects[{ri}]")),
                        int(_require(r, "w", f"{cwhere}.rects[{ri}]")),
                        int(_require(r, "h", f"{cwhere}.rects[{ri}]")),
                        float(_require(r, "weight", f"{cwhere}.rects[{ri}]")),
                    )
                    for ri, r in enumerate(_require(cl, "rects", cwhere))
                )
                classifiers.append(
                    WeakClassifier(
                        feature=HaarFeature(rects),
                        threshold=float(_require(cl, "threshold", cwhere)),
                        left_value=float(_require(cl, "left_value", cwhere)),
                        right_value=float(_require(cl, "right_value", cwhere)),
                    )
                )
            stages.append(
                CascadeStage(
                    classifiers=tuple(classifiers),
                    stage_threshold=float(_require(st, "stage_threshold", where)),
                )
            )
        return CascadeModel(
            base_width=int(_require(doc, "base_width", "$")),
            base_height=int(_require(doc, "base_height", "$")),
            stages=tuple(stages),
        )
    except CascadeFileError:
        raise
    except (TypeError, ValueError) as e:
        raise CascadeFileError(f"{path}: invalid cascade structure: {e}") from e
