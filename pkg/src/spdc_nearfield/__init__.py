"""Near-field SPDC imaging simulator.

Evaluates Green's-function photon-pair rate integrals for a 2D nonlinear
source with point-like absorptive nanoparticles in its near field: LDOS
maps, image-plane rate fields (background and induced-coherence parts),
point-spread functions and resolution, angular background filtering, and
absolute photon-rate estimates.
"""

from .greens import (AngularFilter, PropagatingKernel, g0_closed_form,
                     g0_imag, g_signal_imaging, weyl_g0)
from .scatterer import (NanoParticle, Polarizability, g_scattered, ldos_map,
                        ldos_peak, ldos_peak_sweep, polarizability,
                        scattering_strength)

__version__ = "0.1.0"

__all__ = [
    "AngularFilter",
    "PropagatingKernel",
    "g0_closed_form",
    "g0_imag",
    "g_signal_imaging",
    "weyl_g0",
    "NanoParticle",
    "Polarizability",
    "polarizability",
    "scattering_strength",
    "g_scattered",
    "ldos_map",
    "ldos_peak",
    "ldos_peak_sweep",
    "__version__",
]
