"""Metric configuration: constants transcribed from the metric source papers.

The kernels never hard-code weights; everything tunable lives here and can
be overridden through a flat ``key = value`` text file (see data/default.cfg
for the documented schema). Defaults are embedded so the toolkit runs with
no config file present.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import SchemaError

ENV_CONFIG = "UWQA_CONFIG"


@dataclass(frozen=True)
class MetricConfig:
    # UICM alpha-trimmed statistics: fraction trimmed from each tail.
    alpha_trim: float = 0.1
    # Block grid for the EME / Michelson-contrast sub-measures:
    # k1 blocks along width, k2 along height.
    blocks_k1: int = 10
    blocks_k2: int = 10
    # UIQM combination weights (c1 colorfulness, c2 sharpness, c3 contrast).
    uiqm_weights: tuple[float, float, float] = (0.0282, 0.2953, 3.5753)
    # UICM combination constants for the mean and variance terms.
    uicm_mu_coeff: float = -0.0268
    uicm_sigma_coeff: float = 0.1586
    # UCIQE weights (chroma std, luminance spread, mean saturation).
    uciqe_weights: tuple[float, float, float] = (0.4680, 0.2745, 0.2576)
    # Tail fraction for the UCIQE luminance-contrast percentiles.
    luminance_percentile: float = 0.01
    # CCF combination weights (colorfulness, contrast, fog density).
    # Fog density carries a negative weight: a brighter veiled dark channel
    # means more haze, which lowers perceived quality.
    ccf_weights: tuple[float, float, float] = (0.17593, 0.61759, -0.33988)
    # CCF sub-measure parameters.
    ccf_colorfulness_norm: float = 85.59
    ccf_contrast_tail: float = 0.01
    ccf_fog_window: int = 15
    # Rescaling order inside the quality-index computation. The default
    # takes global extrema after outlier replacement so rescaled values
    # stay in [0, 1]; "pre" reproduces the literal listed order.
    extrema_stage: str = "post_replacement"
    seed: int = field(default=0, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.alpha_trim <= 0.4):
            raise SchemaError(f"alpha_trim must be in [0, 0.4], got {self.alpha_trim}")
        if self.blocks_k1 < 1 or self.blocks_k2 < 1:
            raise SchemaError("block counts must be >= 1")
        for name in ("uiqm_weights", "uciqe_weights", "ccf_weights"):
            w = getattr(self, name)
            if len(w) != 3 or not all(_finite(x) for x in w):
                raise SchemaError(f"{name} must be three finite numbers")
        if not (0.0 < self.luminance_percentile < 0.5):
            raise SchemaError("luminance_percentile must be in (0, 0.5)")
        if not (0.0 < self.ccf_contrast_tail < 0.5):
            raise SchemaError("ccf_contrast_tail must be in (0, 0.5)")
        if self.ccf_fog_window < 1:
            raise SchemaError("ccf_fog_window must be >= 1")
        if self.extrema_stage not in ("post_replacement", "pre_replacement"):
            raise SchemaError(f"unknown extrema_stage: {self.extrema_stage}")


def _finite(x) -> bool:
    try:
        return x == x and abs(float(x)) != float("inf")
    except (TypeError, ValueError):
        return False


_TUPLE_KEYS = {
    "uiqm_weights": ("uiqm_c1", "uiqm_c2", "uiqm_c3"),
    "uciqe_weights": ("uciqe_w1", "uciqe_w2", "uciqe_w3"),
    "ccf_weights": ("ccf_v1", "ccf_v2", "ccf_v3"),
}
_SCALAR_PARSERS = {
    "alpha_trim": float,
    "blocks_k1": int,
    "blocks_k2": int,
    "uicm_mu_coeff": float,
    "uicm_sigma_coeff": float,
    "luminance_percentile": float,
    "ccf_colorfulness_norm": float,
    "ccf_contrast_tail": float,
    "ccf_fog_window": int,
    "extrema_stage": str,
    "seed": int,
}


def parse_config_text(text: str) -> MetricConfig:
    """Parse the flat key/value config format. Unknown keys are rejected."""
    flat_to_tuple = {}
    for tname, keys in _TUPLE_KEYS.items():
        for i, k in enumerate(keys):
            flat_to_tuple[k] = (tname, i)

    scalars: dict = {}
    tuples: dict[str, list] = {t: list(getattr(MetricConfig(), t)) for t in _TUPLE_KEYS}
    touched = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _SCALAR_PARSERS:
            try:
                scalars[key] = _SCALAR_PARSERS[key](value)
            except ValueError as exc:
                raise SchemaError(f"config line {lineno}: {exc}") from exc
        elif key in flat_to_tuple:
            tname, idx = flat_to_tuple[key]
            try:
                tuples[tname][idx] = float(value)
            except ValueError as exc:
                raise SchemaError(f"config line {lineno}: {exc}") from exc
            touched.add(tname)
        else:
            raise SchemaError(f"config line {lineno}: unknown key {key!r}")

    for tname in touched:
        scalars[tname] = tuple(tuples[tname])
    return replace(MetricConfig(), **scalars)


def load_config(path: str | os.PathLike | None = None) -> MetricConfig:
    """Load a config file; fall back to $UWQA_CONFIG, then to defaults."""
    if path is None:
        env = os.environ.get(ENV_CONFIG)
        if env:
            path = env
    if path is None:
        return MetricConfig()
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"config file not found: {p}")
    return parse_config_text(p.read_text(encoding="utf-8"))


def config_as_text(cfg: MetricConfig) -> str:
    """Serialize a config back to the flat key/value format."""
    lines = []
    for f in fields(MetricConfig):
        val = getattr(cfg, f.name)
        if f.name in _TUPLE_KEYS:
            for key, item in zip(_TUPLE_KEYS[f.name], val):
                lines.append(f"{key} = {item!r}")
        else:
            lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
