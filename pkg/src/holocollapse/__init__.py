"""Holonomy groups and collapsing bundle metrics, measured numerically."""

__version__ = "0.1.0"

from .collapse import (CollapsedMetric, CollapseReport, CollapseSchedule, build_canonical_correspondence,
                       collapsed_metric, convergence_sweep, coset_distance, default_net_config, holonomy_at,
                       submersion_map, theorem_b_demo, verify_theorem_a)
from .estimators import CCDiameter, CollapseVerifier, GromovHausdorffOracle, HolonomyEstimator
from .exceptions import (BoundViolated, CutLocusAmbiguous, DisconnectedNet, DomainTooSmall, HolocollapseError,
                         IdentificationAmbiguous, NetMismatch, NoDecay, PathEscapesAtlas, SamplerTooCoarse,
                         SizeCapExceeded, StepRejected)
from .geometry import (BundlePoint, BundleScenario, Sphere2, TangentVector, Torus2, catalog_scenarios,
                       connection_form, curvature_form, get_scenario, horizontal_projection)
from .liegroup import ClosedSubgroup, CompactGroup, algebra_span, quotient_distance
from .metricspace import (Correspondence, FiniteMetricSpace, NetConfig, brute_force_gh, cc_diameter,
                          cc_distance_matrix, distortion, gh_upper_bound)
from .transport import (BaseCurve, HolonomyReport, ambrose_singer_estimate, horizontal_lift, loop_holonomy_sample,
                        parallel_transport)

__all__ = [name for name in dir() if not name.startswith("_")]
