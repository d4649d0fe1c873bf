"""Grid-level tools for domains with a uniform tube-connectivity property.

The package checks class membership of binary masks, measures Hausdorff
distances between cell sets and complements, selects convergent
subsequences, solves masked elliptic Dirichlet problems and anneals shapes
against a tracking functional.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .grid import (FACE, FACE_VERTEX, CompactSet, DistanceField, DomainMask, GridSpec,
                   boundary_cells, closed_complement, connected_components, dilate, edt, erode)
from .metrics import (MetricReport, delta, delta_bruteforce, dist_compact_to_boundary,
                      eps_cover_check, rho)
from .cm_class import (ClassParams, FailingPair, MembershipReport, TubeWitness, check_cm,
                       check_membership, max_tube_radius, repair_to_class, witness_path)
from .convergence import (ConvergenceReport, DomainSequence, LemmaResult, gamma_property_check,
                          h_limit_accumulation, lemma_suite, select_convergent)
from .elliptic import (EllipticCoefficients, EllipticOperator, ScalarField, SolveReport, assemble,
                       energy_check, solve_dirichlet)
from .shape_opt import (Objective, OptimizerConfig, OptTrace, evaluate, minimizing_sequence_report,
                        optimize, support_confinement_check)
from .io import (RunConfig, emit_field, emit_mask, parse_config, parse_field, parse_manifest,
                 parse_mask)
