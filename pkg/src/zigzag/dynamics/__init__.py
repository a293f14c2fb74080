from .coherence import CoherenceFitError, CoherenceScan, NoiseModel, coherence_scan, fit_coherence
from .distributions import PhononDistribution, TruncationError
from .fitting import FitError, FlopFit, FlopFitter, fit_flop
from .rabi import DriveParams, flop_signal, rabi_probability, sideband_rabi
from .sequence import Pulse, SequencePhysics, SequenceResult, SequenceSpec, simulate_sequence
from .spectrum import Line, ScanResult, nonlinear_resonance_frequencies, spectrum_scan

__all__ = [
    "CoherenceFitError", "CoherenceScan", "DriveParams", "FitError", "FlopFit", "FlopFitter", "Line",
    "NoiseModel", "PhononDistribution", "Pulse", "ScanResult", "SequencePhysics", "SequenceResult",
    "SequenceSpec", "TruncationError", "coherence_scan", "fit_coherence", "fit_flop", "flop_signal",
    "nonlinear_resonance_frequencies", "rabi_probability", "sideband_rabi", "simulate_sequence",
    "spectrum_scan",
]
