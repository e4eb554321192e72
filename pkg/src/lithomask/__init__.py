"""Photolithography image formation and phase-field mask inversion.

Forward model: partially coherent areal intensity through a band-flat
smoothed point-spread function, thresholded into the exposed pattern.
Inverse solver: projected gradient descent on a perimeter-regularized
distance functional, driven through a decreasing-epsilon continuation whose
limit is the sharp-interface objective.
"""

__version__ = "0.1.0"

from .fields import BinaryPattern, ScalarField  # noqa: F401
from .geometry import DistanceReport  # noqa: F401
from .imaging import OpticsConfig, make_optics  # noqa: F401
from .kernels import KernelSpec, SampledKernel  # noqa: F401
from .optimize import ObjectiveConfig, SweepTrace, gamma_sweep  # noqa: F401
from .phasefield import DoubleWellSpec, Region  # noqa: F401
