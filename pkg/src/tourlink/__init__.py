"""Linkage in tournaments with large minimum out-degree."""

from .connectivity import (LinkageInstance, LinkageResult, PathSystem, find_unlinked_instance,
                           is_k_connected, is_k_linked_all, is_k_linked_exact, local_connectivity,
                           max_disjoint_paths, verify_path_system, verify_paths, vertex_connectivity)
from .constructions import (BlowupSpec, Construction, PopielarzSpec, blowup_unlinked_instance,
                            directed_cycle_blowup, popielarz, transitive, triangle_blowup)
from .errors import (BudgetExceeded, ClaimViolation, CountViolation, HypothesisExhausted,
                     InvalidTournament, PotentialError, VerificationError)
from .linkage import (LinkageContext, RestrictedEdgeSet, ReversingState, build_restricted_edges,
                      find_reversing_system, link_terminals, reroute_fixed_point,
                      restricted_in_distance, restricted_out_distance, select_good_set,
                      verify_linkage)
from .subdivision import (KStar, PartialSubdivision, augment_edge, bound_d, bound_dstar,
                          embed_kstar, embed_subdivision, extract_min_outdeg_subtournament,
                          minimize_subdivision, verify_kstar, verify_subdivision)
from .tournament import (CondensationOrder, Tournament, load_trn, loads_trn, dumps_trn,
                         min_out_degree, random_tournament, reverse, save_trn,
                         strong_components, validate)

__version__ = "0.1.0"
