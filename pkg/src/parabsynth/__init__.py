"""Numerical synthesis of parabolic germs in spherical normal form."""

from .cauchyheine import SectorialPair, ch_transform, jump_residual
from .errors import ConfigError, NumericalError, ParabSynthError
from .flow import VectorFieldSpec, flow, model_field, time1_map
from .germs import Germ, ModulusData, eval_psi
from .model import ModelParams, model_constants, synthesis_bounds
from .synthesis import SynthesisResult, measure_horn_maps, synthesize

__all__ = [
    "ConfigError",
    "Germ",
    "ModelParams",
    "ModulusData",
    "NumericalError",
    "ParabSynthError",
    "SectorialPair",
    "SynthesisResult",
    "VectorFieldSpec",
    "ch_transform",
    "eval_psi",
    "flow",
    "jump_residual",
    "measure_horn_maps",
    "model_constants",
    "model_field",
    "synthesis_bounds",
    "synthesize",
    "time1_map",
]

__version__ = "0.1.0"
