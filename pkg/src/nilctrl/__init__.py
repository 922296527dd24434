"""Control systems with automorphism-flow drift on low-step nilpotent groups.

The package models a control system whose drift generates a flow of group
automorphisms and whose control fields are invariant: group arithmetic in
exponential coordinates, spectral splitting of the drift derivation,
block-triangular cascade integration, and Monte-Carlo estimation of
reachable sets, control sets, and periodic point sets with boundedness
verdicts.
"""

from .algebra import (Derivation, Gradation, LieAlgebra,
                      SpectralDecomposition, check_grading,
                      spectral_decompose)
from .config import ConfigBundle, load_config
from .dynamics import (ControlLaw, LinearSystem, Trajectory,
                       check_flow_property, concatenate_laws, integrate_law)
from .errors import (ConfigError, InvalidStructureError, NotApplicableError,
                     NotNilpotentError, UnsupportedClassError)
from .group import MAX_CLASS, NilGroup, bch_coefficients
from .reach import (BoundednessReport, GridClassification, PerSetQuery,
                    RegionEstimate, boundedness_report, central_coordinates,
                    central_subgroup_compact, estimate_control_set,
                    estimate_per_set, make_grid, sample_law,
                    sample_reachable)
from .semidirect import (DecomposableSplit, SemidirectSystem, TriangularForm,
                         block_structure_check, build_from_decomposable,
                         law_generator_path, triangular_form,
                         triangular_solve)

__version__ = "0.1.0"

__all__ = [
    "BoundednessReport", "ConfigBundle", "ConfigError", "ControlLaw",
    "DecomposableSplit", "Derivation", "Gradation", "GridClassification",
    "InvalidStructureError", "LieAlgebra", "LinearSystem", "MAX_CLASS",
    "NilGroup", "NotApplicableError", "NotNilpotentError", "PerSetQuery",
    "RegionEstimate", "SemidirectSystem", "SpectralDecomposition",
    "Trajectory", "TriangularForm", "UnsupportedClassError",
    "bch_coefficients", "block_structure_check", "boundedness_report",
    "build_from_decomposable", "central_coordinates",
    "central_subgroup_compact", "check_grading",
    "check_flow_property", "concatenate_laws", "estimate_control_set",
    "estimate_per_set", "integrate_law", "law_generator_path", "load_config",
    "make_grid", "sample_law", "sample_reachable", "spectral_decompose",
    "triangular_form", "triangular_solve", "__version__",
]
