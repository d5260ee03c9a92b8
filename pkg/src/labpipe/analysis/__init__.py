"""Quantitative analysis kernels: detection, clustering, unmixing, fitting."""

from .curvefit import MODEL_REGISTRY, CurveModel, FitResult, UnknownModel, fit_curve
from .detect import DetectedAtoms, DetectionParams, detect_atoms
from .envmap import AnomalyComponent, EnvMap, map_environments
from .freq import FreqDecomposition, WindowTooLarge, spatiofreq_decompose
from .gmm import DegenerateComponent, GmmFit, fit_gmm
from .neighbors import NeighborStats, TooFewAtoms, neighbor_stats
from .unmix import UnmixResult, unmix

__all__ = [
    "MODEL_REGISTRY",
    "CurveModel",
    "FitResult",
    "UnknownModel",
    "fit_curve",
    "DetectedAtoms",
    "DetectionParams",
    "detect_atoms",
    "AnomalyComponent",
    "EnvMap",
    "map_environments",
    "FreqDecomposition",
    "WindowTooLarge",
    "spatiofreq_decompose",
    "DegenerateComponent",
    "GmmFit",
    "fit_gmm",
    "NeighborStats",
    "TooFewAtoms",
    "neighbor_stats",
    "UnmixResult",
    "unmix",
]
