"""Hydrodynamic-limit experiments for zero-range and Ginzburg-Landau/Kawasaki lattice systems."""
from .lattice import (GlkModel, JumpRate, Potential, TorusLattice, TransitionKernel, ZrpModel,
                      catalog_names, load_kernel, load_model, validate_glk, validate_zrp)
from .equilibrium import SigmaFunction, local_gibbs_spec, sample_local_gibbs
from .harness import ConfigError, ExperimentConfig

__version__ = "0.1.0"

__all__ = ["ConfigError", "ExperimentConfig", "GlkModel", "JumpRate", "Potential",
           "SigmaFunction", "TorusLattice", "TransitionKernel", "ZrpModel", "catalog_names",
           "load_kernel", "load_model", "local_gibbs_spec", "sample_local_gibbs",
           "validate_glk", "validate_zrp"]
