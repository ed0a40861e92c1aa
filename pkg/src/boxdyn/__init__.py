"""Rigorous global dynamics from evaluable map approximations.

Pipeline: a map oracle produces box-wise image enclosures on a cubical
grid; the resulting combinatorial outer approximation yields a Morse
graph (recurrent components plus reachability order), homology Conley
indices over a prime field for each node, and a projection comparing
analyses at different resolutions.
"""

from .compare import NuMap, check_epimorphism, morse_tiles, project
from .conley import (ConleyIndex, charpoly_mod_p, conley_index, format_poly,
                     invariant_factors_mod_p, nontriviality, shift_class,
                     shift_invariant_factors)
from .errors import (BoxdynError, CarrierNotAcyclic, ConfigError,
                     DimensionMismatch, EmptyDataset, GridMismatch,
                     NodeNotRecurrent, ParseError, PointOutsideDomain,
                     RegionStraddlesTiles)
from .graph_dynamics import (Condensation, IndexPairC, MorseGraph,
                             condensation, downset, index_pair, morse_graph,
                             morse_graph_from_jsonable, tarjan_scc,
                             verify_attracting_block)
from .grid import (CubicalGrid, PhaseSpace, Rect, box_containing,
                   boxes_intersecting, grid_diameter)
from .homology import (ChainMapData, HomologyBasis, PairComplex,
                       build_pair_complex, carrier, chain_map,
                       induced_homology_map, rank_mod_p, relative_homology,
                       solve_mod_p)
from .oracles import (CallableOracle, LeslieOracle, LipschitzDataOracle,
                      MapOracle, MlpOracle, PiecewiseExample1D)
from .outer_approx import BoxMap, build_boxmap, encloses, restrict_to

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
