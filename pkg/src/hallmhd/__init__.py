"""Pseudospectral Hall-MHD on a periodic box, with decay and Gevrey-regularity diagnostics.

Set ``HALLMHD_KERNELS=numpy`` to bypass the numba kernels and
``HALLMHD_THREADS`` to choose the FFT worker count.
"""

from .spectral import GridSpec, SolenoidalState, SpectralField
from .stepper import StepperConfig, Trajectory, evolve, step
from .initial import make_initial_data
from .heat import HeatFlow, heat_evolve, difference_state
from .gevrey import GevreyParams, GevreyRecord, gevrey_norm, tau_schedule, radius_estimate
from .decay import DecayFit, bootstrap_exponent, diff_decay_exponent, fit_exponent

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "SpectralField",
    "SolenoidalState",
    "StepperConfig",
    "Trajectory",
    "evolve",
    "step",
    "make_initial_data",
    "HeatFlow",
    "heat_evolve",
    "difference_state",
    "GevreyParams",
    "GevreyRecord",
    "gevrey_norm",
    "tau_schedule",
    "radius_estimate",
    "DecayFit",
    "fit_exponent",
    "bootstrap_exponent",
    "diff_decay_exponent",
    "__version__",
]
