"""Synthetic gaze data with known ground truth."""

from .catalog import (
    ClassProfile,
    MeasureDist,
    available_profiles,
    load_class_profile,
    load_profile_data,
    soccer_profiles,
)
from .generator import *  # noqa: F401,F403
from .generator import __all__ as _gen_all

__all__ = ["ClassProfile", "MeasureDist", "available_profiles", "load_class_profile",
           "load_profile_data", "soccer_profiles", *_gen_all]
