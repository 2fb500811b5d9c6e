"""bohmion: regularized quantum hydrodynamics as finite particle systems.

Core layers:

  * kernels        -- smoothing kernels and the pairwise quotient integrals
  * integrators    -- implicit midpoint, RK4, exact unitary conjugation
  * qhd_reference  -- grid Schrodinger propagator and Madelung diagnostics
  * bohmion_qhd    -- single-surface particle dynamics (both regularizations
                      plus the classical cold-fluid closure)
  * nonadiabatic   -- mean-field and exact-factorization particle dynamics,
                      Berry connection / quantum geometric tensor diagnostics
  * service, cli   -- HTTP front-end and its thin command-line client
"""

__version__ = "0.1.0"

from .ensembles import BohmionEnsemble
from .integrators import PhysicalConstants
from .kernels import QuadratureGrid, SmoothingKernel
from .potentials import Potential

__all__ = [
    "BohmionEnsemble",
    "PhysicalConstants",
    "Potential",
    "QuadratureGrid",
    "SmoothingKernel",
    "__version__",
]
