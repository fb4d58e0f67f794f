"""The four reference-free underwater image-quality metrics.

Each metric is a pure function of an ImageBuffer and a MetricConfig. All
combination weights come from the config; the kernels only implement the
formulas. Sub-measures are exposed individually so they can be tested and
recombined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter

from .config import MetricConfig
from .errors import MetricError
from .image import (
    GRAY_WEIGHTS,
    ImageBuffer,
    block_min_max,
    rgb_to_lab,
    to_grayscale,
)

# Luminance threshold below which a pixel is excluded from the UCIQE
# saturation mean (C / L is unstable near black).
SATURATION_L_FLOOR = 1e-6


@dataclass(frozen=True)
class MetricVector:
    uiqm: float
    uciqe: float
    ccf: float
    entropy: float

    def __post_init__(self):
        vals = (self.uiqm, self.uciqe, self.ccf, self.entropy)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"metric vector contains non-finite values: {vals}")
        if not (0.0 <= self.entropy <= 8.0):
            raise ValueError(f"entropy out of [0, 8]: {self.entropy}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.uiqm, self.uciqe, self.ccf, self.entropy)


METRIC_NAMES = ("uiqm", "uciqe", "ccf", "entropy")


def _opponent_channels(img: ImageBuffer) -> tuple[np.ndarray, np.ndarray]:
    r, g, b = img.channels()
    return r - g, (r + g) / 2.0 - b


def _trimmed(values: np.ndarray, alpha: float) -> np.ndarray:
    flat = np.sort(values, axis=None)
    k = int(alpha * flat.size)
    return flat[k: flat.size - k] if k > 0 else flat


def uicm(img: ImageBuffer, cfg: MetricConfig) -> float:
    """Colorfulness from alpha-trimmed opponent-channel statistics."""
    rg, yb = _opponent_channels(img)
    t_rg = _trimmed(rg, cfg.alpha_trim)
    t_yb = _trimmed(yb, cfg.alpha_trim)
    mu_rg, mu_yb = t_rg.mean(), t_yb.mean()
    var_rg = np.mean((t_rg - mu_rg) ** 2)
    var_yb = np.mean((t_yb - mu_yb) ** 2)
    return float(
        cfg.uicm_mu_coeff * np.sqrt(mu_rg**2 + mu_yb**2)
        + cfg.uicm_sigma_coeff * np.sqrt(var_rg + var_yb)
    )


def sobel_magnitude(plane: np.ndarray) -> np.ndarray:
    """3x3 Sobel gradient magnitude with edge-replicated borders."""
    p = np.pad(plane, 1, mode="edge")
    gx = (
        p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]
        - p[:-2, :-2] - 2.0 * p[1:-1, :-2] - p[2:, :-2]
    )
    gy = (
        p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]
        - p[:-2, :-2] - 2.0 * p[:-2, 1:-1] - p[:-2, 2:]
    )
    return np.sqrt(gx * gx + gy * gy)


def _eme(values: np.ndarray, k1: int, k2: int) -> float:
    """Block log-ratio measure; blocks with a zero minimum contribute 0."""
    bmin, bmax = block_min_max(values, k1, k2)
    ok = bmin > 0.0
    ratios = np.where(ok, np.divide(bmax, bmin, out=np.ones_like(bmax), where=ok), 1.0)
    return float((2.0 / (k1 * k2)) * np.log(ratios).sum())


def uism(img: ImageBuffer, cfg: MetricConfig) -> float:
    """Sharpness: channel-weighted EME of the edge-emphasized channels."""
    _require_grid(img, cfg)
    total = 0.0
    for channel, w in zip(img.channels(), GRAY_WEIGHTS):
        edged = channel * sobel_magnitude(channel)
        total += w * _eme(edged, cfg.blocks_k1, cfg.blocks_k2)
    return float(total)


def uiconm(img: ImageBuffer, cfg: MetricConfig) -> float:
    """Contrast: block Michelson-contrast entropy of the grayscale plane."""
    _require_grid(img, cfg)
    gray = to_grayscale(img).values
    bmin, bmax = block_min_max(gray, cfg.blocks_k1, cfg.blocks_k2)
    s = bmax + bmin
    ok = (bmax != bmin) & (s != 0.0)
    m = np.where(ok, np.divide(bmax - bmin, s, out=np.zeros_like(s), where=ok), 1.0)
    terms = np.where(ok, m * np.log(m, out=np.zeros_like(m), where=ok), 0.0)
    return float(terms.sum() / (cfg.blocks_k1 * cfg.blocks_k2))


def combine_uiqm(sub: tuple[float, float, float], cfg: MetricConfig) -> float:
    c1, c2, c3 = cfg.uiqm_weights
    return c1 * sub[0] + c2 * sub[1] + c3 * sub[2]


def uiqm(img: ImageBuffer, cfg: MetricConfig) -> float:
    return combine_uiqm((uicm(img, cfg), uism(img, cfg), uiconm(img, cfg)), cfg)


def _require_grid(img: ImageBuffer, cfg: MetricConfig):
    if img.width < cfg.blocks_k1 or img.height < cfg.blocks_k2:
        raise MetricError(
            f"image {img.width}x{img.height} smaller than the "
            f"{cfg.blocks_k1}x{cfg.blocks_k2} block grid"
        )


def uciqe(img: ImageBuffer, cfg: MetricConfig) -> float:
    """Chroma std + percentile luminance spread + mean saturation in CIELAB."""
    lab = rgb_to_lab(img)
    chroma = np.sqrt(lab.a**2 + lab.b**2)
    sigma_c = float(chroma.std())

    q = cfg.luminance_percentile * 100.0
    lum = lab.L
    spread = float(np.percentile(lum, 100.0 - q) - np.percentile(lum, q))

    keep = lum >= SATURATION_L_FLOOR
    if not keep.any():
        raise MetricError("saturation undefined: every pixel is black")
    mean_sat = float((chroma[keep] / lum[keep]).mean())

    w1, w2, w3 = cfg.uciqe_weights
    return w1 * sigma_c + w2 * spread + w3 * mean_sat


def ccf_colorfulness(img: ImageBuffer, cfg: MetricConfig) -> float:
    """Opponent-channel colorfulness statistic, normalized."""
    rg, yb = _opponent_channels(img)
    spread = np.sqrt(rg.var() + yb.var())
    center = np.sqrt(rg.mean() ** 2 + yb.mean() ** 2)
    return float((spread + 0.3 * center) / cfg.ccf_colorfulness_norm)


def ccf_contrast(img: ImageBuffer, cfg: MetricConfig) -> float:
    """Spread between the top and bottom luminance tails, in [0, 1]."""
    gray = np.sort(to_grayscale(img).values, axis=None)
    n_tail = max(1, int(round(cfg.ccf_contrast_tail * gray.size)))
    return float((gray[-n_tail:].mean() - gray[:n_tail].mean()) / 255.0)


def ccf_fog_density(img: ImageBuffer, cfg: MetricConfig) -> float:
    """Veiling brightness of the eroded dark channel, in [0, 1]."""
    r, g, b = img.channels()
    dark = np.minimum(np.minimum(r, g), b)
    eroded = minimum_filter(dark, size=cfg.ccf_fog_window, mode="nearest")
    return float(eroded.mean() / 255.0)


def combine_ccf(sub: tuple[float, float, float], cfg: MetricConfig) -> float:
    v1, v2, v3 = cfg.ccf_weights
    return v1 * sub[0] + v2 * sub[1] + v3 * sub[2]


def ccf(img: ImageBuffer, cfg: MetricConfig) -> float:
    sub = (
        ccf_colorfulness(img, cfg),
        ccf_contrast(img, cfg),
        ccf_fog_density(img, cfg),
    )
    return combine_ccf(sub, cfg)


def entropy(img: ImageBuffer) -> float:
    """Shannon entropy of the 256-bin rounded-grayscale histogram, in bits."""
    gray = to_grayscale(img).values
    levels = np.rint(gray).astype(np.int64)
    counts = np.bincount(levels.ravel(), minlength=256)
    p = counts[counts > 0] / levels.size
    return float(-(p * np.log2(p)).sum() + 0.0)


def metric_vector(img: ImageBuffer, cfg: MetricConfig) -> MetricVector:
    """All four metrics for one image. Deterministic for identical input."""
    values = {}
    for name, fn in (
        ("uiqm", lambda: uiqm(img, cfg)),
        ("uciqe", lambda: uciqe(img, cfg)),
        ("ccf", lambda: ccf(img, cfg)),
        ("entropy", lambda: entropy(img)),
    ):
        try:
            values[name] = fn()
        except MetricError as exc:
            raise MetricError(f"{name}: {exc}") from exc
    return MetricVector(**values)
