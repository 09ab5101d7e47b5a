"""Lost-object recovery: trusted template, similarity checks, decision rules.

A trusted template (features + color histogram of a known-good object patch)
arbitrates between the baseline box and the motion box whenever the baseline
looks unhealthy. The motion box wins only when it is strictly more similar in
feature correlation AND no worse in color-histogram distance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dcf import Filter
from .errors import UndefinedSimilarityError
from .imaging import BoundingBox


@dataclass(frozen=True)
class TrustedTemplate:
    """Uncontaminated object snapshot used to arbitrate proposals.

    ``filt`` is the correlation filter learned at the trusted frame; it seeds
    the re-learn after a recovery jump so the contaminated online filter
    never anchors the new template.
    """

    features: np.ndarray
    histogram: np.ndarray
    source_frame: int
    confidence: float
    filt: Filter | None = None


@dataclass(frozen=True)
class Candidate:
    """A box proposal with features/histogram matching the trusted dims."""

    features: np.ndarray
    histogram: np.ndarray
    box: BoundingBox


@dataclass(frozen=True)
class LocationChoice:
    chosen: str  # "baseline" | "motion"
    s1_base: float
    s1_motion: float
    s2_base: float
    s2_motion: float

    @property
    def box_is_motion(self) -> bool:
        return self.chosen == "motion"


def similarity_corr(f_star: np.ndarray, x: np.ndarray) -> float:
    """Cosine similarity of the flattened feature maps, in [-1, 1]."""
    a = np.asarray(f_star, dtype=np.float64).ravel()
    b = np.asarray(x, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {f_star.shape} vs {x.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedSimilarityError("zero-norm feature vector")
    return float(np.dot(a, b) / (na * nb))


def similarity_chisq(v_star: np.ndarray, v_x: np.ndarray) -> float:
    """Chi-square distance between normalized histograms (smaller = closer).

    Bins where both entries are zero contribute nothing.
    """
    a = np.asarray(v_star, dtype=np.float64)
    b = np.asarray(v_x, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"bin count mismatch: {a.shape} vs {b.shape}")
    denom = a + b
    mask = denom > 0
    return float((((a - b) ** 2)[mask] / denom[mask]).sum())


def choose_location(
    trusted: TrustedTemplate, base: Candidate, motion: Candidate
) -> LocationChoice:
    """Keep the baseline unless the motion candidate beats it on both checks.

    Motion is chosen iff its feature correlation is strictly higher AND its
    histogram distance is no larger. A candidate whose similarity is
    undefined loses outright.
    """

    def scores(cand: Candidate) -> tuple[float, float]:
        try:
            s1 = similarity_corr(trusted.features, cand.features)
        except UndefinedSimilarityError:
            return -np.inf, np.inf
        s2 = similarity_chisq(trusted.histogram, cand.histogram)
        return s1, s2

    s1_b, s2_b = scores(base)
    s1_m, s2_m = scores(motion)
    take_motion = (s1_m > s1_b) and (s2_m <= s2_b) and np.isfinite(s1_m)
    return LocationChoice(
        chosen="motion" if take_motion else "baseline",
        s1_base=s1_b,
        s1_motion=s1_m,
        s2_base=s2_b,
        s2_motion=s2_m,
    )


def should_recover(
    score: float,
    centers: list[tuple[float, float]],
    threshold: float,
    frame_size: tuple[int, int] | None = None,
    k: int = 10,
    radius: float = 2.0,
    margin: float = 5.0,
) -> bool:
    """Whether the recovery path must run this frame.

    True when the appearance score is below the threshold, when the last
    ``k`` centers sit within ``radius`` px of each other although earlier
    motion was larger (tracker stalled), or when the center has hugged a
    frame border (within ``margin`` px) for ``k`` frames.
    """
    if score < threshold:
        return True
    if len(centers) >= k:
        recent = np.asarray(centers[-k:], dtype=np.float64)
        spread = np.linalg.norm(recent - recent.mean(axis=0), axis=1).max()
        if spread <= radius and len(centers) >= 2 * k:
            earlier = np.asarray(centers[-2 * k : -k], dtype=np.float64)
            steps = np.linalg.norm(np.diff(earlier, axis=0), axis=1)
            if steps.size and steps.mean() > radius:
                return True
        if frame_size is not None:
            w, h = frame_size
            near = [
                min(cx, cy, w - 1 - cx, h - 1 - cy) <= margin for cx, cy in recent
            ]
            if all(near):
                return True
    return False


def update_trusted(
    current: TrustedTemplate,
    candidate: Candidate,
    score: float,
    frame_idx: int,
    recovery_active: bool = False,
    tau_trust: float = 0.5,
    refresh_interval: int = 50,
    filt: Filter | None = None,
) -> TrustedTemplate:
    """Refresh the trusted template from a high-confidence healthy frame.

    No-op while recovery is active, below the trust threshold, or within the
    refresh interval of the last update.
    """
    if recovery_active or score < tau_trust:
        return current
    if frame_idx - current.source_frame < refresh_interval:
        return current
    return TrustedTemplate(
        features=candidate.features,
        histogram=candidate.histogram,
        source_frame=frame_idx,
        confidence=float(score),
        filt=filt if filt is not None else current.filt,
    )
