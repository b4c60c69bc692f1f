"""kamtori: quasi-periodic invariant tori of degenerate dissipative systems.

Subpackages
-----------
trigpoly     Fourier series on the torus (truncation, norms, calculus)
model        system representation, scaling matrices, validation
smoothing    analytic smoothing operator and approximation sequences
homological  exact solves of the three homological equations
kamdriver    the KAM iteration, schedules, torus extraction
resonance    resonant zones, survivor sets, measure estimates
bounds       executable truncation-tail and small-divisor-sum bounds
cli          batch front end (run / sweep / bounds / smooth)
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
