"""Gradient-descent object saliency toolkit.

A small CNN classifier is trained on labeled images; saliency for a new
image is found by gradient-descending the image itself under a cost that
lowers the predicted-class logit while clamping the others.  The per-pixel
decrease becomes the raw map, which is smoothed over SLIC superpixels and
refined with LAB color-contrast cues.
"""

from .color import rgb_to_lab
from .evaluation import PRCurve, batch_report, best_f, f_beta, pr_curve
from .lowlevel import (
    build_lowlevel,
    color_distribution,
    contrast_smooth,
    global_contrast,
    lowlevel_map,
    refine,
    superpixel_stats,
)
from .nn import CheckpointError, Network, TrainingDivergedError, desk_scale_net
from .pipeline import PipelineConfig, parse_config, run_pipeline, serialize_config
from .saliency import (
    SaliencyParams,
    SaliencyRun,
    cost,
    gd_step,
    output_error,
    raw_saliency,
    run_saliency,
)
from .superpixel import SuperpixelMap, slic, smooth
from .synthetic import SHAPE_CLASSES, SyntheticSample, generate_dataset

__version__ = "0.1.0"
