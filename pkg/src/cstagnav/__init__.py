"""Walkable-direction estimation from segmented video with category-aware
spatio-temporal attribute graphs."""

from .cstag import LAYOUT_TAG, FrameGraph, build_frame_graph
from .dataset import (
    Category,
    CategoryMap,
    Difficulty,
    FrameRaster,
    SafeAnnotation,
    SequenceManifest,
    load_manifest,
    load_model,
    save_manifest,
    save_model,
)
from .errors import CstagError
from .evaluation import EvalConfig, EvalReport, evaluate, frame_accuracy, radius_sweep
from .model import Baseline, CostModel, Cue, Prediction, baseline_predict, predict
from .pipeline import PipelineParams, PipelineRun, prepare_sequence, run_sequence
from .synth import SceneSpec, generate, write_sequence
from .temporal import EntityRegistry, MatchParams
from .training import SgdConfig, TrainingSet, sgd_fit, train

__version__ = "0.1.0"
