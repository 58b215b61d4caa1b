"""Topological pressure, singular-value dimension roots and exceptional sets
for expanding maps and their repellers."""

from .cocycle import Repeller, lyapunov_spectrum, phi_s, psi_s, singular_values
from .dimension import bowen_root, box_dimension, caratheodory_dim, mcmullen_dim
from .exceptional import AvoidSpec, avoid_series, build_avoid_sft, theorem_a_series, theorem_b_series
from .models import (
    LinearToral,
    PerturbedDoubling,
    SftAffine,
    carpet_model,
    diagonal_torus,
    doubling,
    load_model,
    model_from_dict,
)
from .pressure import Family, pressure_limit, pressure_separated, pressure_spectral
from .symbolic import Sft, forbid_words, full_shift, golden_mean_shift, topological_entropy

__version__ = "0.1.0"
