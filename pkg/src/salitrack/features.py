"""Handcrafted features: HOG channels, quantized color-key channels, histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegionError
from .imaging import BoundingBox, luma

HOG_BINS = 9
HOG_CLIP = 0.2

# Prototype RGB values for the 11 English color names (X11/CSS anchors),
# normalized to [0,1]. Deterministic stand-in for a learned colornames table.
DEFAULT_PALETTE = (
    np.array(
        [
            [0, 0, 0],  # black
            [0, 0, 255],  # blue
            [139, 69, 19],  # brown
            [128, 128, 128],  # gray
            [0, 128, 0],  # green
            [255, 165, 0],  # orange
            [255, 192, 203],  # pink
            [128, 0, 128],  # purple
            [255, 0, 0],  # red
            [255, 255, 255],  # white
            [255, 255, 0],  # yellow
        ],
        dtype=np.float64,
    )
    / 255.0
)


@dataclass(frozen=True)
class ColorKeyModel:
    """Palette of N color keys with interior/exterior key distributions.

    ``keys`` are RGB prototypes in [0,1]^3. ``p_in``/``p_out`` are normalized
    histograms of key usage inside and outside a reference box, ``css`` the
    per-key saliency scores derived from them, and ``z`` the shared
    normalization of the pairwise exponential weights. ``salient`` records
    whether any key cleared the acceptance floor when the model was built.
    """

    keys: np.ndarray
    p_in: np.ndarray
    p_out: np.ndarray
    css: np.ndarray
    z: float
    salient: bool = True

    def __post_init__(self):
        if len(self.keys) < 2:
            raise ValueError("palette needs at least 2 keys")

    @property
    def n_keys(self) -> int:
        return len(self.keys)

    @staticmethod
    def from_keys(keys: np.ndarray) -> "ColorKeyModel":
        """Model with the given keys and flat, non-salient distributions."""
        keys = np.asarray(keys, dtype=np.float64)
        n = len(keys)
        flat = np.full(n, 1.0 / n)
        return ColorKeyModel(
            keys=keys, p_in=flat, p_out=flat.copy(), css=np.zeros(n), z=1.0, salient=False
        )


def quantize_colors(patch: np.ndarray, palette: ColorKeyModel | np.ndarray) -> np.ndarray:
    """Map each pixel to its nearest palette key (Euclidean in normalized RGB).

    Ties resolve to the lowest key index. Returns an (H, W) int array.
    """
    keys = palette.keys if isinstance(palette, ColorKeyModel) else np.asarray(palette)
    if len(keys) == 0:
        raise ValueError("empty palette")
    rgb = np.asarray(patch, dtype=np.float64) / 255.0
    if rgb.ndim == 2:
        rgb = np.stack([rgb] * 3, axis=-1)
    # (H, W, N) squared distances; argmin picks the lowest index on ties
    d2 = ((rgb[:, :, None, :] - keys[None, None, :, :]) ** 2).sum(axis=-1)
    return np.argmin(d2, axis=2)


def color_histogram(keys: np.ndarray, region: BoundingBox, n_bins: int) -> np.ndarray:
    """Normalized histogram of key indices over the region of a key map."""
    h, w = keys.shape
    x0 = max(0, int(np.floor(region.x)))
    y0 = max(0, int(np.floor(region.y)))
    x1 = min(w, int(np.ceil(region.x + region.w)))
    y1 = min(h, int(np.ceil(region.y + region.h)))
    if x1 <= x0 or y1 <= y0:
        raise EmptyRegionError(f"region {region} does not intersect {w}x{h} key map")
    sub = keys[y0:y1, x0:x1]
    counts = np.bincount(sub.ravel(), minlength=n_bins).astype(np.float64)
    return counts / counts.sum()


def hog_features(patch: np.ndarray, cell_size: int) -> np.ndarray:
    """Per-cell HOG: 9 unsigned orientation bins, L2 block norm with clipping.

    Gradients are central differences on luma, so a constant intensity offset
    leaves the output unchanged. Each cell's histogram is normalized by the
    energies of the (up to four) 2x2-cell blocks containing it, clipped at
    0.2, and the normalizations averaged.
    """
    gray = luma(patch)
    h, w = gray.shape
    gh, gw = h // cell_size, w // cell_size
    if gh < 1 or gw < 1:
        raise ValueError(f"patch {w}x{h} smaller than one {cell_size}px cell")

    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx) % np.pi  # unsigned orientation in [0, pi)
    bins = np.minimum((ang / (np.pi / HOG_BINS)).astype(np.int64), HOG_BINS - 1)

    # accumulate magnitude votes per cell and orientation bin
    crop_h, crop_w = gh * cell_size, gw * cell_size
    ci = (np.arange(crop_h) // cell_size)[:, None]
    cj = (np.arange(crop_w) // cell_size)[None, :]
    flat_cell = (ci * gw + cj).ravel()
    flat_bin = bins[:crop_h, :crop_w].ravel()
    hist = np.zeros((gh * gw, HOG_BINS), dtype=np.float64)
    np.add.at(hist, (flat_cell, flat_bin), mag[:crop_h, :crop_w].ravel())
    hist = hist.reshape(gh, gw, HOG_BINS)

    # 2x2-cell block energies; pad with edge cells so border cells see full blocks
    eps = 1e-6
    energy = (hist**2).sum(axis=2)
    ep = np.pad(energy, 1, mode="edge")
    out = np.zeros_like(hist)
    for dy in (0, 1):
        for dx in (0, 1):
            block = (
                ep[dy : dy + gh, dx : dx + gw]
                + ep[dy + 1 : dy + 1 + gh, dx : dx + gw]
                + ep[dy : dy + gh, dx + 1 : dx + 1 + gw]
                + ep[dy + 1 : dy + 1 + gh, dx + 1 : dx + 1 + gw]
            )
            out += np.minimum(hist / np.sqrt(block + eps)[:, :, None], HOG_CLIP)
    return out / 4.0


def cell_key_fractions(keys: np.ndarray, n_keys: int, cell_size: int) -> np.ndarray:
    """Per-cell occupancy fraction of each color key; channels sum to 1 per cell."""
    h, w = keys.shape
    gh, gw = h // cell_size, w // cell_size
    sub = keys[: gh * cell_size, : gw * cell_size]
    blocks = sub.reshape(gh, cell_size, gw, cell_size).transpose(0, 2, 1, 3)
    blocks = blocks.reshape(gh, gw, cell_size * cell_size)
    frac = np.zeros((gh, gw, n_keys), dtype=np.float64)
    for k in range(n_keys):
        frac[:, :, k] = (blocks == k).mean(axis=2)
    return frac


def extract_features(patch: np.ndarray, cell_size: int, palette: ColorKeyModel) -> np.ndarray:
    """HOG channels concatenated with color-key occupancy channels.

    Output shape is (H // cell, W // cell, 9 + N) for an N-key palette.
    """
    hog = hog_features(patch, cell_size)
    keys = quantize_colors(patch, palette)
    color = cell_key_fractions(keys, palette.n_keys, cell_size)
    return np.concatenate([hog, color], axis=2)
