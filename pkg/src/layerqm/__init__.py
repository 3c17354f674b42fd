"""Spectral and scattering theory of point interactions in a quantum layer.

The layer is R^2 x [0, d] with Dirichlet walls (units hbar = 2m = 1),
optionally in a perpendicular homogeneous magnetic field.
"""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DomainError, EmbeddedEigenvalueError,
                     LayerQMError, SingularInputError, ThresholdError)
from .layer_green import (Energy, KreinMatrix, LayerConfig, Perturbation,
                          dxi_dz, free_green, free_green_dz, krein_matrix,
                          krein_matrix_dz, scale_transform, xi, xi2)
from .spectrum_single import (BoundState1, dirichlet_ball_bound, eigenfunction_1,
                              solve_bound_state, strong_coupling_estimate,
                              strong_eigenfunction, weak_coupling_estimate,
                              weak_coupling_log_gap, weak_eigenfunction)
from .spectrum_multi import (SpectrumResult, certify_embedded, degenerate_triple,
                             eigenfunction_N, find_eigenvalues, sector_root,
                             strong_coupling_N, vertical_pair, weak_coupling_N,
                             weak_eigenfunction_N)
from .scattering import (ChannelBasis, SMatrix1, SOperatorN, amplitude_single,
                         s_wave_function, smatrix_single, soperator_N,
                         unitarity_defect)
from .magnetic import (EssentialPoint, Gap, MagneticConfig, dxi_B_dz,
                       empty_alpha_intervals, essential_spectrum,
                       free_green_B, gap_eigenvalue_single,
                       gap_eigenvalues_multi, gaps, krein_matrix_B, xi_B)
