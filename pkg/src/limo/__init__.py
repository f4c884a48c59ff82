"""limo: speaker-coordinated listener head-motion generation."""

__version__ = "0.1.0"

from .estimator import ListenerMotionGenerator
from .metrics import MetricReport, evaluate_sets
from .motion import CoefficientGroup, MotionSequence, frame_diff, split_segments
from .synthdata import SynthConfig, gen_dataset, gen_pair, load_dataset
from .textprior import ListenerAnnotation, parse_text_prior, render_text_prior

__all__ = [
    "CoefficientGroup",
    "ListenerAnnotation",
    "ListenerMotionGenerator",
    "MetricReport",
    "MotionSequence",
    "SynthConfig",
    "evaluate_sets",
    "frame_diff",
    "gen_dataset",
    "gen_pair",
    "load_dataset",
    "parse_text_prior",
    "render_text_prior",
    "split_segments",
    "__version__",
]
