"""Lattice workbench for polynomial field functionals.

Subpackages: :mod:`pqft.lattice` (spacetime, wave operator, propagators,
retractions), :mod:`pqft.functionals` (polynomial functionals and multivector
fields), :mod:`pqft.koszul` (differential, homotopy operator, time slice),
:mod:`pqft.quantize` (bracket and star product), :mod:`pqft.cones` (direction
cone calculus), :mod:`pqft.probe` (windowed-FFT wavefront probe and the
pairing counterexample scan), :mod:`pqft.cli` (scenario runner).
"""

from .lattice import (LatticeSpacetime, PropagatorSet, Retraction, SwitchingFunction,
                      alpha_apply, apply_wave_operator, build_lattice, causal_hull,
                      compute_propagators, gamma_map, make_switching, solve_cauchy,
                      wave_operator_matrix)
from .functionals import (LambdaPoly, MultiVectorField, PolyFunctional, evaluate,
                          eval_derivative, pullback_linear, spacetime_support,
                          wick_polynomial)
from .koszul import (CauchyData, HomotopyReport, gamma0_pullback, homotopy_operator,
                     koszul_differential, on_shell_restrict, time_slice_check,
                     verify_homotopy_identity)
from .quantize import (HbarSeries, SlotPermutation, check_associativity,
                       check_first_order_commutator, poisson_bracket,
                       sigma_permutation, star_multivector, star_product)
from .cones import (DirectionCone, ProductCone, cone_ops, conormal_check,
                    dotted_product, gamma_n, verify_cone_lemma)
from .probe import (AuditReport, OscillatoryFamily, ProbeReport, SampledDistribution,
                    counterexample_scan, equicontinuity_audit, oscillatory_family,
                    wavefront_probe)

__version__ = "0.1.0"
