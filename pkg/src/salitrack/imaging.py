"""Pixel-level primitives: boxes, cropping, integral images, window search, blurs.

Coordinate convention everywhere: 0-based, origin at the top-left, x grows
rightward, y grows downward. Images are numpy arrays indexed [row, col] i.e.
[y, x], with an optional trailing channel axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box (left, top, width, height) in pixels, real-valued.

    May extend beyond the frame; consumers that crop pad by edge replication.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"degenerate box: w={self.w}, h={self.h}")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    @staticmethod
    def from_center(cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return BoundingBox(cx - w / 2.0, cy - h / 2.0, w, h)

    def astuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


def luma(img: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma of an RGB image; grayscale input passes through."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    return img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114


def crop_patch(img: np.ndarray, box: BoundingBox, out_w: int, out_h: int) -> np.ndarray:
    """Resample the box region of ``img`` to ``out_h x out_w`` (bilinear).

    Samples are taken at output pixel centers mapped into the box; source
    coordinates outside the frame clamp to the nearest edge pixel (edge
    replication). Works on (H, W) maps and (H, W, C) images; returns float64.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be >= 1, got {out_w}x{out_h}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]

    # pixel-center mapping: output pixel j samples box.x + (j + 0.5) * bw/ow - 0.5
    xs = box.x + (np.arange(out_w) + 0.5) * (box.w / out_w) - 0.5
    ys = box.y + (np.arange(out_h) + 0.5) * (box.h / out_h) - 0.5
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0

    if img.ndim == 3:
        fx = fx[None, :, None]
        fy = fy[:, None, None]
        top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
        bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    else:
        fx = fx[None, :]
        fy = fy[:, None]
        top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
        bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def integral_image(m: np.ndarray) -> np.ndarray:
    """Inclusive 2-D prefix sums: out[i, j] = sum of m over [0..i] x [0..j]."""
    m = np.asarray(m, dtype=np.float64)
    return np.cumsum(np.cumsum(m, axis=0), axis=1)


def window_sums(m: np.ndarray, win_w: int, win_h: int) -> np.ndarray:
    """Sums of every win_h x win_w window of ``m`` via its integral image.

    Entry [i, j] is the sum of the window whose top-left cell is (j, i).
    """
    h, w = m.shape
    if win_w > w or win_h > h:
        raise ValueError(f"window {win_w}x{win_h} exceeds map {w}x{h}")
    ii = np.zeros((h + 1, w + 1), dtype=np.float64)
    ii[1:, 1:] = integral_image(m)
    ny, nx = h - win_h + 1, w - win_w + 1
    return (
        ii[win_h : win_h + ny, win_w : win_w + nx]
        - ii[:ny, win_w : win_w + nx]
        - ii[win_h : win_h + ny, :nx]
        + ii[:ny, :nx]
    )


def max_sum_window(m: np.ndarray, win_w: int, win_h: int) -> tuple[BoundingBox, float]:
    """Place a win_w x win_h window to maximize the covered sum.

    Ties break to the smallest y, then the smallest x. The reported sum is
    recomputed directly over the chosen window, so it is free of integral
    rounding.
    """
    m = np.asarray(m, dtype=np.float64)
    sums = window_sums(m, win_w, win_h)
    flat = int(np.argmax(sums))  # row-major argmax = first (y, x) occurrence
    y, x = divmod(flat, sums.shape[1])
    total = float(m[y : y + win_h, x : x + win_w].sum())
    return BoundingBox(float(x), float(y), float(win_w), float(win_h)), total


def gaussian_blur(m: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur with reflected borders; channels blurred independently."""
    m = np.asarray(m, dtype=np.float64)
    if sigma <= 0:
        return m.copy()
    if m.ndim == 3:
        return ndimage.gaussian_filter(m, sigma=(sigma, sigma, 0), mode="nearest")
    return ndimage.gaussian_filter(m, sigma=sigma, mode="nearest")


def box_blur3(m: np.ndarray) -> np.ndarray:
    """3x3 box blur with edge-replicated borders."""
    m = np.asarray(m, dtype=np.float64)
    return ndimage.uniform_filter(m, size=3, mode="nearest")
