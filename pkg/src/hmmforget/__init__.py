"""Lyapunov spectra and exponential loss of memory for hidden Markov chains."""

from .model import HmmModel, build_model, check_hypotheses, read_model
from .simulate import ObservationWindow, derive_seed, future_window, past_window, sample_path

__version__ = "0.1.0"

__all__ = [
    "HmmModel",
    "ObservationWindow",
    "build_model",
    "check_hypotheses",
    "derive_seed",
    "future_window",
    "past_window",
    "read_model",
    "sample_path",
]
