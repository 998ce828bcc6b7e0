from core.detector_design import DetectorDesigner, PhotodiodeSpec, AmplifierStageSpec, Environment
from core.rf_network import FrequencySweep, TwoPortNetwork, LumpedElement, NetworkTopology
from core.optimizer import GeneticOptimizer, GaConfig
from core.homodyne_sim import DetectorModel, HomodyneSimulator
from core.quantization_entropy import AdcConfig, NoisePartition
from core.toeplitz_extractor import ToeplitzExtractor, ExtractorConfig, ToeplitzSeed
from core.tomography import HusimiAccumulator, GridSpec
from core.stat_tests import BitSequence, run_suite
__all__ = [
    "DetectorDesigner", "PhotodiodeSpec", "AmplifierStageSpec", "Environment",
    "FrequencySweep", "TwoPortNetwork", "LumpedElement", "NetworkTopology",
    "GeneticOptimizer", "GaConfig",
    "DetectorModel", "HomodyneSimulator",
    "AdcConfig", "NoisePartition",
    "ToeplitzExtractor", "ExtractorConfig", "ToeplitzSeed",
    "HusimiAccumulator", "GridSpec",
    "BitSequence", "run_suite",
]
