"""Simulation, optimization and optimality certificates for controlled sweeping processes."""

from .certify import Certificate, certify
from .optimize import BoxDomain, grid_search, nelder_mead
from .planar import Configuration, ControlledVelocityModel, ScenarioSpec
from .polytope import Halfspace, Polyhedron, project
from .sweeping import ControlSignal, Grid, Trajectory, simulate

__all__ = [
    "BoxDomain",
    "Certificate",
    "Configuration",
    "ControlSignal",
    "ControlledVelocityModel",
    "Grid",
    "Halfspace",
    "Polyhedron",
    "ScenarioSpec",
    "Trajectory",
    "certify",
    "grid_search",
    "nelder_mead",
    "project",
    "simulate",
]

__version__ = "0.1.0"
