"""Near-field localization of a reconfigurable intelligent surface (RIS).

A TX/RX pair at known positions observes an OFDM path reflected by a
linear RIS with time-varying random phase profiles. The package computes
Cramer-Rao bounds on the RIS position, orientation and path delay, runs a
multi-stage estimator, and drives seeded Monte-Carlo studies.
"""
from .crb import CrbReport, compute_crb
from .estimator import RisEstimate, SearchSettings, estimate_pipeline
from .geometry import RisPose
from .signal import PhaseProfiles, SystemConfig, random_profiles, synthesize_observation

__version__ = "0.1.0"

__all__ = [
    "CrbReport", "PhaseProfiles", "RisEstimate", "RisPose", "SearchSettings", "SystemConfig",
    "compute_crb", "estimate_pipeline", "random_profiles", "synthesize_observation", "__version__",
]
