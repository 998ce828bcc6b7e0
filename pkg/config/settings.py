from dataclasses import dataclass


@dataclass
class Settings:
    """
    Centralized default settings for the detector design chain.

    Every library class falls back to these values when a parameter is not
    given explicitly. Experiment-specific values live in a RunConfig document
    (see config.run_config); nothing here is read from the environment.
    """
    # Detector design
    TEMPERATURE_K: float = 300.0
    OPTICAL_POWER_W: float = 1.0e-3

    # RF network
    Z_REF_OHM: float = 50.0
    SENSITIVITY_REL_STEP: float = 0.01

    # Genetic optimizer
    GA_POPULATION: int = 64
    GA_GENERATIONS: int = 200
    GA_MUTATION_RATE: float = 0.3
    GA_CROSSOVER_RATE: float = 0.7
    GA_TOURNAMENT_SIZE: int = 3
    GA_MUTATION_SIGMA_DECADES: float = 0.1

    # Spectrum estimation
    SEGMENT_LEN: int = 1024
    SMOOTHING_BINS: int = 5

    # Quantization / entropy
    ADC_BITS: int = 8
    EMAX_SIGMA_MULTIPLIER: float = 5.0

    # Extractor
    EXTRACTOR_N_IN: int = 2207
    EPSILON_HASH: float = 1e-50
    EXTRACT_BATCH_BLOCKS: int = 64

    # Statistical suite
    ALPHA: float = 0.01
    SEQUENCE_LEN: int = 1_000_000
    BATCH_SIZE: int = 100
    BLOCK_FREQUENCY_LEN: int = 128
    SERIAL_M: int = 16
    APEN_M: int = 10

    # Tomography
    HUSIMI_BINS: int = 64
    HUSIMI_EXTENT: float = 3.0

    # Execution
    WORKERS: int = 1
    OUTPUT_DIR: str = "runs"


    def validate(self) -> bool:
        if self.TEMPERATURE_K <= 0:
            raise ValueError("TEMPERATURE_K must be positive")

        if self.SEGMENT_LEN <= 0 or self.SEGMENT_LEN & (self.SEGMENT_LEN - 1):
            raise ValueError("SEGMENT_LEN must be a power of two")

        if not 0 < self.ALPHA < 1:
            raise ValueError("ALPHA must lie in (0, 1)")

        if self.WORKERS < 1:
            raise ValueError("WORKERS must be at least 1")

        return True



# Singleton instance for easy import
settings = Settings()
