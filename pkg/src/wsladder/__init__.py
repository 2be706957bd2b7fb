"""Mechanical Wannier-Stark ladders of coupled Lamb-wave plate resonators."""
from .bessel import bessel_j
from .bloch import BandTable, band_structure, bloch_bands, gxmg_path
from .calibration import (CalibrationCurve, ReconciliationReport, calibrate_length, calibrate_width,
                          calibration_curve, extract_kappa, reconcile, synthesize_ladder_layout)
from .eigen import (EigenResult, SparseSym, dense_generalized_eig, dense_sym_eig, shift_invert_lanczos,
                    sparse_factor, tridiag_eig)
from .errors import (FactorizationFailure, InvalidArgument, InvalidGeometry, InvalidMesh, ModeNotFound,
                     NumericalFailure, WsLadderError)
from .fem import (FemSystem, ModeShape, StrainField, assemble, chain_modes, find_fundamental_compression,
                  fundamental_frequency, modal, splitting, strain_field)
from .geometry import (DIAMOND, BridgeSpec, Material, NetworkLayout, PlateSpec, layout_chain,
                       layout_pair, layout_phononic_cell, layout_single)
from .localization import (DisorderConfig, EnsembleResult, SiteProfile, disorder_ensemble, ipr,
                           ipr_spectrum, participation_number)
from .mesh import Mesh, mesh
from .tb_model import (ChainModel, Spectrum, WannierStarkParams, build_graph_model, build_ws_chain,
                       compare_to_analytic, solve_modes, ws_analytic_state, ws_ladder_frequencies)

__version__ = "0.1.0"
