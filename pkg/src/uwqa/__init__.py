"""uwqa: no-reference underwater image-quality and detection-evaluation toolkit."""

from .config import MetricConfig, load_config
from .image import ImageBuffer, LabImage, Plane, decode_image, partition_blocks, rgb_to_lab, to_grayscale
from .metrics import MetricVector, ccf, entropy, metric_vector, uciqe, uiqm
from .qindex import (
    MetricTable,
    QIndexTable,
    assign_bins,
    compute_qindex,
    delta_qindex,
    distribution_summary,
    flag_outliers,
    mad,
    replace_outliers,
    sample_bins,
)

__all__ = [
    "MetricConfig",
    "load_config",
    "ImageBuffer",
    "Plane",
    "LabImage",
    "decode_image",
    "to_grayscale",
    "rgb_to_lab",
    "partition_blocks",
    "MetricVector",
    "uiqm",
    "uciqe",
    "ccf",
    "entropy",
    "metric_vector",
    "MetricTable",
    "QIndexTable",
    "mad",
    "flag_outliers",
    "replace_outliers",
    "compute_qindex",
    "delta_qindex",
    "assign_bins",
    "sample_bins",
    "distribution_summary",
]

__version__ = "0.1.0"
