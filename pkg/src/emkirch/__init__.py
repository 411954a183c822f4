"""emkirch: electromagnetic Kirchhoff migration toolkit.

Forward-simulates array measurements of radiating dipoles (passive) and
Born point scatterers (active), forms vector/matrix-valued Kirchhoff
images, and recovers cross-range polarization vectors and polarizability
tensors with depth-oscillation correction.
"""

__version__ = "0.1.0"

from . import analysis, emcore, forward, imaging, scene  # noqa: F401
from .kernels import backend_name  # noqa: F401
