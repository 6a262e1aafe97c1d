"""Worked probability models with regularly log-periodic tails."""

from .counterexample import excursion_function, excursion_height, excursion_window
from .galton_watson import GaltonWatson
from .semistable import SemistableLaw, admissible_amplitude
from .smoothing import (
    AssumptionReport,
    PopulationRun,
    SmoothingModel,
    SmoothingSolution,
    mc_tail_rows,
    population_run,
    sample_population,
    tail_inverse_table,
    transform_rows,
)
from .stpetersburg import StPetersburg

__all__ = [
    "StPetersburg",
    "SemistableLaw",
    "admissible_amplitude",
    "GaltonWatson",
    "SmoothingModel",
    "SmoothingSolution",
    "AssumptionReport",
    "PopulationRun",
    "population_run",
    "sample_population",
    "mc_tail_rows",
    "transform_rows",
    "tail_inverse_table",
    "excursion_function",
    "excursion_height",
    "excursion_window",
]
