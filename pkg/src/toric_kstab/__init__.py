"""Exact non-Archimedean K-stability invariants of polarized toric varieties."""
from .dh import DHMeasure, degree, degree_derivative, integrate_weight, pushforward
from .functionals import (FunctionalReport, donaldson_oracle, energy_weighted, entropy_weighted,
                          extremal_function, futaki, mabuchi, ricci_energy, scalar_mean)
from .geometry import EMPTY, GeometryError, HPolytope, facet_sigma, intersect, lp_support, volume
from .measures import (AtomicMeasure, MassMismatch, NonConvergence, d1_product, i_functional,
                       ma_twisted_canonical, ma_weighted, solve_ma)
from .potentials import (Cell, GTransform, LinearPath, PLConcave, PLConvex, concave_envelope,
                         evaluate_potential, g_transform, inv_g_transform, linear_path,
                         scale_action, subdivision)
from .stability import (StabilityReport, beta, filtration_volume, j_energy, twist_infimum,
                        verdict)
from .toric import (CombinatorialCollapse, FanData, deform_canonical, fan_of, log_discrepancy)
from .weights import Weight

__version__ = "0.1.0"
