"""speclab: spectral instability of non-self-adjoint matrices.

Projection-norm instability indices, random tridiagonal ensemble statistics
and finite-volume experiments on the non-self-adjoint Anderson model.
"""

__version__ = "0.1.0"
