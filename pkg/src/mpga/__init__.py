"""Multipopulation genetic algorithm simulator with an analytic cumulant
engine, Kullback-Leibler island graphs and an Ising-model application."""

from .errors import ConfigError, MPGAError, NumericalError
from .klgraph import KLGraph, build_kl_graph, entropy_gc, gaussian_kl, kl_correction, kl_total
from .sim import RunConfig, run_experiment
from .theory import Topology, predict_trajectory

__version__ = "0.1.0"
