"""Background motion estimation, compensation, residuals, and the motion box.

Pipeline: corner-like points sampled on a coarse grid outside the object box
are matched between consecutive frames by block matching; a robust
translation (optionally upgraded to affine) explains the background; warping
the previous frame by that model and differencing against the current frame
leaves the independently-moving foreground as a residual blob; the motion box
covers the largest residual mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import InsufficientEvidenceError, NoEvidenceError
from .imaging import BoundingBox, box_blur3, luma, max_sum_window

GRID_STEP = 16  # px between candidate corners
MAX_POINTS = 200
BLOCK_RADIUS = 4  # 9x9 matching blocks
SEARCH_RADIUS = 12  # +-12 px displacement search
RATIO_REJECT = 0.9  # best/second-best SAD above this is ambiguous
MIN_MATCHES = 4
AFFINE_MIN_INLIERS = 12
AFFINE_GAIN = 0.7  # affine accepted if residual < 0.7x translation residual


@dataclass(frozen=True)
class MotionModel:
    """Global background motion between two frames.

    ``params`` is (tx, ty) for a translation, or the 6 affine coefficients
    (a11, a12, a21, a22, tx, ty) mapping previous-frame points to
    current-frame points.
    """

    kind: str  # "translation" | "affine"
    params: tuple
    inlier_fraction: float = 1.0

    @staticmethod
    def identity() -> "MotionModel":
        return MotionModel("translation", (0.0, 0.0), 1.0)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Map (N, 2) previous-frame (x, y) points into the current frame."""
        pts = np.asarray(pts, dtype=np.float64)
        if self.kind == "translation":
            return pts + np.asarray(self.params)
        a11, a12, a21, a22, tx, ty = self.params
        x = a11 * pts[:, 0] + a12 * pts[:, 1] + tx
        y = a21 * pts[:, 0] + a22 * pts[:, 1] + ty
        return np.stack([x, y], axis=1)

    def inverse_xy(self, xg: np.ndarray, yg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map current-frame coordinate grids back into the previous frame."""
        if self.kind == "translation":
            tx, ty = self.params
            return xg - tx, yg - ty
        a11, a12, a21, a22, tx, ty = self.params
        det = a11 * a22 - a12 * a21
        u = xg - tx
        v = yg - ty
        return (a22 * u - a12 * v) / det, (-a21 * u + a11 * v) / det


def _harris_response(gray: np.ndarray, sigma: float = 1.5, k: float = 0.04) -> np.ndarray:
    gy, gx = np.gradient(gray)
    sxx = ndimage.gaussian_filter(gx * gx, sigma, mode="nearest")
    syy = ndimage.gaussian_filter(gy * gy, sigma, mode="nearest")
    sxy = ndimage.gaussian_filter(gx * gy, sigma, mode="nearest")
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def _sample_corners(gray: np.ndarray, exclude: BoundingBox | None) -> np.ndarray:
    """Best corner per GRID_STEP tile, outside the excluded box and borders."""
    h, w = gray.shape
    margin = BLOCK_RADIUS + SEARCH_RADIUS + 1
    resp = _harris_response(gray)
    pts = []
    for ty in range(0, h, GRID_STEP):
        for tx in range(0, w, GRID_STEP):
            tile = resp[ty : ty + GRID_STEP, tx : tx + GRID_STEP]
            iy, ix = np.unravel_index(int(np.argmax(tile)), tile.shape)
            y, x = ty + iy, tx + ix
            if tile[iy, ix] <= 1e-8:
                continue
            if x < margin or y < margin or x >= w - margin or y >= h - margin:
                continue
            if exclude is not None and (
                exclude.x <= x < exclude.x2 and exclude.y <= y < exclude.y2
            ):
                continue
            pts.append((x, y, tile[iy, ix]))
    if not pts:
        return np.zeros((0, 2))
    pts.sort(key=lambda p: -p[2])
    return np.array([(p[0], p[1]) for p in pts[:MAX_POINTS]], dtype=np.float64)


def _block_match(prev: np.ndarray, curr: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """SAD block matching of prev points into curr; returns (N, 4) matches."""
    br, sr = BLOCK_RADIUS, SEARCH_RADIUS
    side = 2 * br + 1
    span = side + 2 * sr
    windows = sliding_window_view(curr, (side, side))
    matches = []
    for x, y in pts:
        xi, yi = int(round(x)), int(round(y))
        block = prev[yi - br : yi + br + 1, xi - br : xi + br + 1]
        region = windows[yi - br - sr : yi - br + sr + 1, xi - br - sr : xi - br + sr + 1]
        if region.shape[0] != 2 * sr + 1 or region.shape[1] != 2 * sr + 1:
            continue
        sad = np.abs(region - block[None, None]).sum(axis=(2, 3))
        by, bx = np.unravel_index(int(np.argmin(sad)), sad.shape)
        best = sad[by, bx]
        # second best outside the 3x3 neighborhood of the winner
        masked = sad.copy()
        masked[max(0, by - 1) : by + 2, max(0, bx - 1) : bx + 2] = np.inf
        second = masked.min()
        if second <= 1e-12:  # flat region, every displacement matches
            continue
        if best / second > RATIO_REJECT:
            continue
        matches.append((x, y, x + bx - sr, y + by - sr))
    return np.array(matches, dtype=np.float64) if matches else np.zeros((0, 4))


def _fit_translation(matches: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Median-initialized translation with iterative outlier rejection."""
    d = matches[:, 2:4] - matches[:, 0:2]
    inliers = np.ones(len(d), dtype=bool)
    t = np.median(d, axis=0)
    for _ in range(3):
        resid = np.linalg.norm(d - t, axis=1)
        new_inliers = resid <= 2.0
        if new_inliers.sum() < MIN_MATCHES:
            break
        inliers = new_inliers
        t = d[inliers].mean(axis=0)
    resid = float(np.linalg.norm(d[inliers] - t, axis=1).mean()) if inliers.any() else np.inf
    return t, inliers, resid


def _fit_affine(matches: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Least-squares affine on the matches; None if the system degenerates."""
    src = matches[:, 0:2]
    dst = matches[:, 2:4]
    ones = np.ones((len(src), 1))
    a = np.hstack([src, ones])
    try:
        coef, _, rank, _ = np.linalg.lstsq(a, dst, rcond=None)
    except np.linalg.LinAlgError:
        return None
    if rank < 3:
        return None
    lin = coef[:2, :].T  # rows: (a11, a12), (a21, a22)
    if abs(np.linalg.det(lin)) < 1e-6:
        return None
    pred = a @ coef
    resid = float(np.linalg.norm(dst - pred, axis=1).mean())
    params = (lin[0, 0], lin[0, 1], lin[1, 0], lin[1, 1], coef[2, 0], coef[2, 1])
    return np.array(params), resid


def estimate_global_motion(
    prev: np.ndarray, curr: np.ndarray, exclude: BoundingBox | None = None
) -> MotionModel:
    """Estimate the background motion from ``prev`` to ``curr``.

    Corner points outside ``exclude`` (the current object box) are matched by
    block matching; a robust translation is fitted and upgraded to affine when
    at least 12 inliers support a materially better fit. Raises
    InsufficientEvidenceError when fewer than 4 valid matches survive.
    """
    gp = luma(prev)
    gc = luma(curr)
    if gp.shape != gc.shape:
        raise ValueError(f"frame size mismatch: {gp.shape} vs {gc.shape}")
    pts = _sample_corners(gp, exclude)
    matches = _block_match(gp, gc, pts)
    if len(matches) < MIN_MATCHES:
        raise InsufficientEvidenceError(f"only {len(matches)} valid matches")

    t, inliers, t_resid = _fit_translation(matches)
    frac = float(inliers.mean())
    model = MotionModel("translation", (float(t[0]), float(t[1])), frac)

    if inliers.sum() >= AFFINE_MIN_INLIERS:
        fit = _fit_affine(matches[inliers])
        if fit is not None:
            params, a_resid = fit
            if a_resid < AFFINE_GAIN * max(t_resid, 1e-6):
                model = MotionModel("affine", tuple(float(p) for p in params), frac)
    return model


def residual_map(prev: np.ndarray, curr: np.ndarray, motion: MotionModel) -> np.ndarray:
    """Per-pixel |curr - warp(prev)| luma difference in [0, 1], lightly blurred.

    Pixels whose warp source falls outside the previous frame, plus a 2-px
    frame border, are zeroed.
    """
    gp = luma(prev) / 255.0
    gc = luma(curr) / 255.0
    if gp.shape != gc.shape:
        raise ValueError(f"frame size mismatch: {gp.shape} vs {gc.shape}")
    h, w = gc.shape
    xg, yg = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    sx, sy = motion.inverse_xy(xg, yg)
    valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)

    sxc = np.clip(sx, 0, w - 1)
    syc = np.clip(sy, 0, h - 1)
    x0 = np.floor(sxc).astype(np.int64)
    y0 = np.floor(syc).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sxc - x0
    fy = syc - y0
    comp = (
        gp[y0, x0] * (1 - fx) * (1 - fy)
        + gp[y0, x1] * fx * (1 - fy)
        + gp[y1, x0] * (1 - fx) * fy
        + gp[y1, x1] * fx * fy
    )

    resid = box_blur3(np.abs(gc - comp))
    resid[~valid] = 0.0
    resid[:2, :] = 0.0
    resid[-2:, :] = 0.0
    resid[:, :2] = 0.0
    resid[:, -2:] = 0.0
    return resid


def _min_span_covering(profile: np.ndarray, q: float) -> tuple[int, int]:
    """Smallest [i, j) span whose profile mass is >= q of the total."""
    total = profile.sum()
    target = q * total
    best = (0, len(profile))
    csum = np.concatenate([[0.0], np.cumsum(profile)])
    i = 0
    for j in range(1, len(csum)):
        while csum[j] - csum[i + 1] >= target:
            i += 1
        if csum[j] - csum[i] >= target and (j - i) < (best[1] - best[0]):
            best = (i, j)
    return best


def motion_proposal(
    residual: np.ndarray,
    ref_size: tuple[float, float],
    size_mode: str = "fixed",
    coverage: float = 0.85,
) -> BoundingBox:
    """Box covering the largest residual mass.

    ``fixed`` keeps the reference size; ``integral-clip`` sizes the box from
    the row/column residual profiles (smallest span covering ``coverage`` of
    the mass per axis, clamped to [0.5x, 2x] of the reference size) before
    placing it. Raises NoEvidenceError when the residual is all-zero.
    """
    residual = np.asarray(residual, dtype=np.float64)
    h, w = residual.shape
    if residual.sum() <= 0.0:
        raise NoEvidenceError("residual map carries no mass")

    win_w = int(round(ref_size[0]))
    win_h = int(round(ref_size[1]))
    if size_mode == "integral-clip":
        x0, x1 = _min_span_covering(residual.sum(axis=0), coverage)
        y0, y1 = _min_span_covering(residual.sum(axis=1), coverage)
        win_w = int(round(np.clip(x1 - x0, 0.5 * ref_size[0], 2.0 * ref_size[0])))
        win_h = int(round(np.clip(y1 - y0, 0.5 * ref_size[1], 2.0 * ref_size[1])))
    elif size_mode != "fixed":
        raise ValueError(f"unknown size_mode {size_mode!r}")

    win_w = max(1, min(win_w, w))
    win_h = max(1, min(win_h, h))
    box, _ = max_sum_window(residual, win_w, win_h)
    return box
