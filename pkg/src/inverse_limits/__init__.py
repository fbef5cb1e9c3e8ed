"""Finite towers of inverse systems of metric measure graphs, checked in exact arithmetic."""

from .graph_core import GraphPoint, MetricMeasureGraph, PLFunction, path_graph, subdivide
from .inverse_step import AxiomParams, Projection, check_axioms, fuzzy_section, solve_measure
from .system_builder import InverseSystem, SystemParams, build_preset, build_system
from .cli_io import load_system, save_system

__all__ = [
    "AxiomParams",
    "GraphPoint",
    "InverseSystem",
    "MetricMeasureGraph",
    "PLFunction",
    "Projection",
    "SystemParams",
    "build_preset",
    "build_system",
    "check_axioms",
    "fuzzy_section",
    "load_system",
    "path_graph",
    "save_system",
    "solve_measure",
    "subdivide",
]
