"""Correlation-filter core: labels, template learning, FFT localization, scale.

The template f minimizes, over all D channels,

    J(f) = 1/2 ||sum_d x^d corr f^d - y||^2
         + 1/2 sum_d ||w . f^d||^2
         + mu/2 ||f - f_prev||^2

with circular cross-correlation, a spatial weight w that suppresses the patch
borders, and a temporal pull toward the previous template. The solver
alternates a per-frequency closed form for the data + temporal terms with a
per-pixel closed form for the spatial term (auxiliary copy g of f, scaled dual
h, growing penalty). The raw alternation is not guaranteed monotone in J, so
the best iterate seen is tracked and returned; the recorded trace is that
incumbent sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import ColorKeyModel, extract_features
from .imaging import BoundingBox, crop_patch


@dataclass(frozen=True)
class Filter:
    """Learned per-channel template, stored in the frequency domain."""

    coeffs_f: np.ndarray  # complex (gh, gw, D)
    objective_trace: tuple = ()

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.coeffs_f.shape[:2]

    @property
    def n_channels(self) -> int:
        return self.coeffs_f.shape[2]

    def spatial(self) -> np.ndarray:
        return np.real(np.fft.ifft2(self.coeffs_f, axes=(0, 1)))

    def digest(self) -> bytes:
        return self.coeffs_f.tobytes()


def make_label(grid_w: int, grid_h: int, sigma: float) -> np.ndarray:
    """Gaussian regression target, peak 1 at the grid center cell."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    cy, cx = grid_h // 2, grid_w // 2
    dy = (np.arange(grid_h) - cy)[:, None]
    dx = (np.arange(grid_w) - cx)[None, :]
    return np.exp(-(dx**2 + dy**2) / (2.0 * sigma**2))


def make_spatial_weight(
    grid_w: int,
    grid_h: int,
    target_w: float,
    target_h: float,
    w_min: float = 0.05,
    w_max: float = 10.0,
) -> np.ndarray:
    """Quadratic-bowl weight: ~w_min over the target extent, rising outside."""
    cy, cx = grid_h // 2, grid_w // 2
    dx = np.maximum(0.0, np.abs(np.arange(grid_w) - cx) - target_w / 2.0) / max(grid_w / 2.0, 1.0)
    dy = np.maximum(0.0, np.abs(np.arange(grid_h) - cy) - target_h / 2.0) / max(grid_h / 2.0, 1.0)
    return w_min + w_max * (dx[None, :] ** 2 + dy[:, None] ** 2)


def cosine_window(grid_h: int, grid_w: int) -> np.ndarray:
    return np.hanning(grid_h)[:, None] * np.hanning(grid_w)[None, :]


def response_map(coeffs_f: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Circular cross-correlation response summed over channels."""
    xf = np.fft.fft2(x, axes=(0, 1))
    rf = (xf * np.conj(coeffs_f)).sum(axis=2)
    return np.real(np.fft.ifft2(rf))


def objective_value(
    f: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    mu: float = 0.0,
    f_prev: np.ndarray | None = None,
) -> float:
    """Spatial-domain value of the learning objective at template ``f``."""
    resp = response_map(np.fft.fft2(f, axes=(0, 1)), x)
    val = 0.5 * float(((resp - y) ** 2).sum())
    val += 0.5 * float(((w[:, :, None] * f) ** 2).sum())
    if mu > 0.0 and f_prev is not None:
        val += 0.5 * mu * float(((f - f_prev) ** 2).sum())
    return val


def learn_filter(
    x: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    mu: float = 0.0,
    f_prev: Filter | None = None,
    n_iters: int = 2,
    penalty_init: float = 10.0,
    penalty_step: float = 1.2,
    penalty_max: float = 100.0,
) -> Filter:
    """Learn a template from features ``x`` and regression target ``y``.

    ``f_prev`` may be None only when the temporal term is off (first frame);
    otherwise the solver pulls toward it with weight ``mu``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.shape[:2] != y.shape or x.shape[:2] != w.shape:
        raise ValueError(f"dimension mismatch: x {x.shape}, y {y.shape}, w {w.shape}")
    if mu < 0:
        raise ValueError("mu must be non-negative")
    gh, gw, nd = x.shape

    xf = np.fft.fft2(x, axes=(0, 1))
    yf = np.fft.fft2(y)
    if f_prev is not None:
        if f_prev.coeffs_f.shape != x.shape:
            raise ValueError(
                f"previous filter shape {f_prev.coeffs_f.shape} != features {x.shape}"
            )
        phi_prev = f_prev.coeffs_f
        fp_sp = f_prev.spatial()
    else:
        mu = 0.0
        phi_prev = np.zeros_like(xf)
        fp_sp = None

    s_xx = (np.abs(xf) ** 2).sum(axis=2)
    data_b = xf * np.conj(yf)[:, :, None]

    g = np.zeros((gh, gw, nd))
    h = np.zeros((gh, gw, nd))
    gamma = penalty_init
    best_f = None
    best_val = np.inf
    trace = []
    for _ in range(max(1, n_iters)):
        c = mu + gamma
        b = data_b + mu * phi_prev + gamma * np.fft.fft2(g - h, axes=(0, 1))
        ahb = (np.conj(xf) * b).sum(axis=2)
        phi = (b - xf * (ahb / (c + s_xx))[:, :, None]) / c
        f_sp = np.real(np.fft.ifft2(phi, axes=(0, 1)))

        val = objective_value(f_sp, x, y, w, mu, fp_sp)
        if val <= best_val:
            best_val = val
            best_f = f_sp
        trace.append(best_val)

        g = gamma * (f_sp + h) / (w**2 + gamma)[:, :, None]
        h = h + f_sp - g
        gamma = min(gamma * penalty_step, penalty_max)

    return Filter(
        coeffs_f=np.fft.fft2(best_f, axes=(0, 1)), objective_trace=tuple(trace)
    )


def correlate_locate(
    filt: Filter, x_search: np.ndarray
) -> tuple[tuple[int, int], float, np.ndarray]:
    """Locate the response peak of ``filt`` over a search feature map.

    Returns (offset, score, response): the (dy, dx) cell displacement of the
    argmax from the grid center, the peak value (the appearance score), and
    the full response map.
    """
    x_search = np.asarray(x_search, dtype=np.float64)
    if x_search.shape[2] != filt.n_channels:
        raise ValueError(
            f"channel mismatch: search {x_search.shape[2]}, filter {filt.n_channels}"
        )
    resp = response_map(filt.coeffs_f, x_search)
    gh, gw = resp.shape
    iy, ix = np.unravel_index(int(np.argmax(resp)), resp.shape)
    offset = (int(iy) - gh // 2, int(ix) - gw // 2)
    return offset, float(resp[iy, ix]), resp


@dataclass(frozen=True)
class SearchGeometry:
    """Fixed crop geometry of one tracker instance.

    A search crop at scale s covers ``model_side * resize_ratio * s`` pixels
    and is resampled to ``model_side`` so the feature grid never changes.
    """

    model_side: int
    cell_size: int
    resize_ratio: float

    @property
    def grid(self) -> int:
        return self.model_side // self.cell_size

    def crop_side(self, scale: float) -> float:
        return self.model_side * self.resize_ratio * scale

    def cells_to_pixels(self, cells: float, scale: float) -> float:
        return cells * self.cell_size * self.resize_ratio * scale


def search_features(
    frame: np.ndarray,
    center: tuple[float, float],
    geom: SearchGeometry,
    scale: float,
    palette: ColorKeyModel,
    window: np.ndarray | None = None,
) -> np.ndarray:
    """Crop the search window at ``center``/``scale`` and extract features."""
    side = geom.crop_side(scale)
    box = BoundingBox.from_center(center[0], center[1], side, side)
    patch = crop_patch(frame, box, geom.model_side, geom.model_side)
    feats = extract_features(patch, geom.cell_size, palette)
    if window is not None:
        feats = feats * window[:, :, None]
    return feats


def estimate_scale(
    filt: Filter,
    frame: np.ndarray,
    center: tuple[float, float],
    current_scale: float,
    geom: SearchGeometry,
    palette: ColorKeyModel,
    window: np.ndarray | None = None,
    n_scales: int = 5,
    step: float = 1.02,
    damping: float = 0.98,
) -> tuple[float, float]:
    """Pick the best relative scale from a small pyramid around 1.0.

    Non-unit scales are damped so that on equal raw scores the scale closest
    to 1.0 wins. Returns (scale multiplier, damped score at that scale).
    """
    half = n_scales // 2
    exps = sorted(range(-half, n_scales - half), key=abs)  # closest to 1.0 first
    best_s, best_score = 1.0, -np.inf
    for e in exps:
        s = step**e
        x = search_features(frame, center, geom, current_scale * s, palette, window)
        _, score, _ = correlate_locate(filt, x)
        damped = score if e == 0 else score * damping
        if damped > best_score:
            best_s, best_score = s, damped
    return best_s, best_score
