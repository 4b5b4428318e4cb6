"""fluxtem: entanglement-assisted TEM simulation with an rf-SQUID flux qubit.

Subpackages:
  protocol   - state-vector measurement cycle and phase accumulation
  optics     - Fourier-optics beam shaping, ring shadow, detector model
  estimator  - Monte Carlo phase estimation, dose scaling, imaging
  device     - beam deflection and SQUID sizing calculators
  cli        - deterministic experiment runner (also `python -m fluxtem`)
"""

from .constants import CODATA, PhysicalConstants
from .detector import DetectorModel
from .estimator import (
    DoseReport,
    EstimationResult,
    SpecimenMap,
    dose_scaling_experiment,
    estimate_phase,
    heisenberg_k,
    image_scan,
    make_checkerboard,
    required_electrons_conventional,
    required_electrons_entangled,
)
from .optics import MaskSpec, OpticsConfig, RingSpec, WaveField, build_detector, propagate
from .protocol import (
    GroupPlan,
    JointState,
    QubitState,
    compensate,
    entangle,
    measure_qubit,
    prepare_symmetric,
    run_group,
)
from .streams import derive

__version__ = "0.1.0"

__all__ = [
    "CODATA",
    "PhysicalConstants",
    "DetectorModel",
    "DoseReport",
    "EstimationResult",
    "SpecimenMap",
    "dose_scaling_experiment",
    "estimate_phase",
    "heisenberg_k",
    "image_scan",
    "make_checkerboard",
    "required_electrons_conventional",
    "required_electrons_entangled",
    "MaskSpec",
    "OpticsConfig",
    "RingSpec",
    "WaveField",
    "build_detector",
    "propagate",
    "GroupPlan",
    "JointState",
    "QubitState",
    "compensate",
    "entangle",
    "measure_qubit",
    "prepare_symmetric",
    "run_group",
    "derive",
    "__version__",
]
