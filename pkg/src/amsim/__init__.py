"""Desk-scale aerial-manipulator toolkit: rigid-body simulation, payload
inertia estimation, inertia-aware gain-scheduled control, and angular-rate
loop margin analysis."""

__version__ = "0.1.0"

from . import (adaptation, config, controller, delta, dynamics, freqdom,
               metrics, presense, scenario, spatial)

__all__ = ["adaptation", "config", "controller", "delta", "dynamics",
           "freqdom", "metrics", "presense", "scenario", "spatial",
           "__version__"]
