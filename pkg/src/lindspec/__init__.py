"""Spectral analysis of Liouvillians for dissipative phase transitions."""
__version__ = "0.1.0"

from .analysis import (PowerLawFit, ScanRecord, bifurcation_point, fidelity, kerr_family,
                       locate_bifurcation, power_law_fit, refine_gap_minimum, scan,
                       scan_point, two_photon_family)
from .dynamics import decompose_state, evolve_expm, evolve_trajectory, jordan_decay_check
from .liouville import SuperMatrix, build_liouvillian
from .models import (ModelSpec, build_model, kerr_model, kerr_thermo, two_level_model,
                     two_photon_model, two_photon_thermo)
from .spectra import (EigenPair, PhaseSplit, Spectrum, detect_jordan, full_spectrum,
                      hermitian_split, leading_spectrum, steady_state)
from .symmetry import (check_symmetry, number_parity_symmetry, sector_decompose,
                       symmetry_broken_basis, symmetry_from_unitary)
