"""Entropy solutions of 1D Burgers, backward Lagrangian flows and anomaly diagnostics."""
from importlib.metadata import PackageNotFoundError, version as _version

from ._accel import BACKEND
from .backward_flow import BranchLaw, PathEnsemble, branch_densities, sample_paths, verify_martingale
from .dissipation import EntropyPair, eulerian_rate, instantaneous_rate, lagrangian_anomaly
from .entropy_core import EntropySolution, build_shock_tree, evaluate, shock_interval
from .errors import BurgersError, ConfigInvalid, IOFailure
from .initial import InitialVelocity
from .monte_carlo import (SdeConfig, escape_probability, fluctuation_check, integrate_backward,
                          khokhlov_escape)
from .transport import Profile, evolve_density, evolve_scalar, momentum_anomaly, scalar_anomaly
from .viscous import (TransitionDensity, ViscousSolution, khokhlov_family, khokhlov_inviscid,
                      khokhlov_solution, limit_measure)

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "BACKEND", "BranchLaw", "BurgersError", "ConfigInvalid", "EntropyPair", "EntropySolution",
    "IOFailure", "InitialVelocity", "PathEnsemble", "Profile", "SdeConfig", "TransitionDensity",
    "ViscousSolution", "branch_densities", "build_shock_tree", "escape_probability", "eulerian_rate",
    "evaluate", "evolve_density", "evolve_scalar", "fluctuation_check", "instantaneous_rate",
    "integrate_backward", "khokhlov_escape", "khokhlov_family", "khokhlov_inviscid",
    "khokhlov_solution", "lagrangian_anomaly", "limit_measure", "momentum_anomaly",
    "sample_paths", "scalar_anomaly", "shock_interval", "verify_martingale", "__version__",
]
