"""Numerical laboratory for discounted mean field games on the 1D torus."""

from mfglab.measures import GridMeasure, TorusGrid, make_probe, probe_panel, w1_distance
from mfglab.model import ModelSpec, TestFunctional

__all__ = [
    "GridMeasure",
    "TorusGrid",
    "ModelSpec",
    "TestFunctional",
    "make_probe",
    "probe_panel",
    "w1_distance",
]

__version__ = "0.1.0"
