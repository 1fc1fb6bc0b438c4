"""Sinogram inpainting toolkit.

Phantom synthesis, parallel-beam Radon transform and filtered
backprojection, sparse-view angle masking, a frequency-domain
convolution block with physics-aware losses, classical baselines,
masked-region metrics, and a small reverse-mode autodiff engine that
ties the differentiable pieces together.
"""

__version__ = "0.1.0"

from .tensor import ContractViolation, Rng, Tensor  # noqa: F401
