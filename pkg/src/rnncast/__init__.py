"""Recurrent forecasters for regional case counts, trained from scratch in numpy."""
__version__ = "0.1.0"

from ._jit import BACKEND
from .core import ModelConfig, ModelParameters, RecurrentModel, forward, init_params
from .data import (ScalerParams, SplitSpec, TimeSeries, compute_active, fit_scaler,
                   inverse_transform, load_jhu_csv, load_simple_csv, make_windows,
                   split_by_date, transform)
from .evaluation import (compare_architectures, evaluate_one_step, mae, run_approach1,
                         run_approach2)
from .explain import capture_trace, compare_envelopes, export_heatmap, extract_envelope
from .forecast import evaluate_then_forecast, recursive_forecast
from .training import bptt_gradients, check_gradients, mse, rmsprop_step, train
