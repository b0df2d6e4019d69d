"""Shared fixtures and independent oracles used across the test suite.

The oracles here are deliberately naive re-implementations (brute force,
compensated summation, flood fill, exact rationals) kept separate from the
production code paths they verify.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from pallor.calibration import apply_gains, compute_gains
from pallor.features import extract_features
from pallor.imaging import RgbImage
from pallor.nn import Dense, Network, NetworkSpec, Standardization
from pallor.rng import SplitMix64, derive_seed
from pallor.screening import RegressorModel
from pallor.segmentation import classical_segment, to_mask
from pallor.synthdata import SynthConfig, generate_sample


def random_image(rng: SplitMix64, width: int, height: int, lo=0.0, hi=255.0) -> RgbImage:
    vals = rng.uniform_array(3 * width * height, lo, hi)
    return RgbImage(vals.reshape(3, height, width))


def make_feature_dataset(n, noise_sigma, seed, hb_range=(7.0, 14.0), gain_range=(0.5, 2.0)):
    """(FeatureVector, gold_hb) pairs straight from in-memory synth samples."""
    cfg = SynthConfig(
        noise_sigma=noise_sigma, gain_range=gain_range, hb_range=hb_range, seed=seed
    )
    hbs = SplitMix64(seed ^ 0x5A5A5A).uniform_array(n, *hb_range)
    out = []
    for i in range(n):
        sample = generate_sample(float(hbs[i]), cfg, derive_seed(seed, i))
        cal = apply_gains(sample.image, compute_gains(sample.image, sample.card_roi))
        mask, _ = to_mask(classical_segment(cal))
        out.append((extract_features(cal, mask), sample.gold_hb))
    return out


def make_segmentation_pairs(n, seed, noise_sigma=2.0, gain_range=(0.5, 2.0)):
    """(calibrated image, ground-truth mask) pairs for segmenter training."""
    cfg = SynthConfig(noise_sigma=noise_sigma, gain_range=gain_range, seed=seed)
    hbs = SplitMix64(seed ^ 0x5A5A5A).uniform_array(n, 7.0, 14.0)
    out = []
    for i in range(n):
        sample = generate_sample(float(hbs[i]), cfg, derive_seed(seed, i))
        cal = apply_gains(sample.image, compute_gains(sample.image, sample.card_roi))
        out.append((cal, sample.mask_gt))
    return out


def inverse_map_regressor() -> RegressorModel:
    """A regressor whose weights implement the synthetic ground-truth map
    hb = 10*ei + 9 exactly: isolates serving-path tests from training noise."""
    spec = NetworkSpec(input_shape=(3,), layers=(Dense(3, 1),), seed=0)
    params = [(np.array([[0.0, 0.0, 10.0]]), np.array([9.0]))]
    net = Network(spec, params)
    return RegressorModel(
        net=net,
        standardization=Standardization(mean=(0.0, 0.0, 0.0), std=(1.0, 1.0, 1.0)),
    )


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------


def fsum_channel_means(image: RgbImage, y0, y1, x0, x1):
    """Compensated-summation mean oracle over an ROI."""
    out = []
    for c in range(3):
        vals = image.planes[c, y0:y1, x0:x1].ravel().tolist()
        out.append(math.fsum(vals) / len(vals))
    return tuple(out)


def otsu_brute_force(bins) -> int:
    """Exhaustive 128-candidate search with exact rational arithmetic."""
    counts = [int(c) for c in bins]
    n = len(counts)
    best_t, best_sigma = 0, Fraction(-1)
    for t in range(n):
        w0 = sum(counts[: t + 1])
        w1 = sum(counts[t + 1 :])
        if w0 == 0 or w1 == 0:
            sigma = Fraction(0)
        else:
            mu0 = Fraction(sum(i * counts[i] for i in range(t + 1)), w0)
            mu1 = Fraction(sum(i * counts[i] for i in range(t + 1, n)), w1)
            sigma = Fraction(w0) * Fraction(w1) * (mu0 - mu1) ** 2
        if sigma > best_sigma:
            best_t, best_sigma = t, sigma
    return best_t


def flood_fill_components(keep: np.ndarray) -> list[set]:
    """4-connected components by explicit BFS; returns sets of (y, x)."""
    h, w = keep.shape
    seen = np.zeros_like(keep, dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if not keep[y, x] or seen[y, x]:
                continue
            comp = set()
            stack = [(y, x)]
            seen[y, x] = True
            while stack:
                cy, cx = stack.pop()
                comp.add((cy, cx))
                for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                    if 0 <= ny < h and 0 <= nx < w and keep[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            comps.append(comp)
    return comps


def confusion_brute_force(pairs, cutoff):
    """Counts each pair into exactly one of tp/fp/tn/fn, the slow way."""
    tp = sum(1 for p, g in pairs if p < cutoff and g < cutoff)
    fp = sum(1 for p, g in pairs if p < cutoff and not g < cutoff)
    fn = sum(1 for p, g in pairs if not p < cutoff and g < cutoff)
    tn = sum(1 for p, g in pairs if not p < cutoff and not g < cutoff)
    return tp, fp, tn, fn
