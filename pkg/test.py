import numpy as np

from core.detector_design import AMPLIFIER_CATALOG, PHOTODIODE_CATALOG, CalcMode, DetectorDesigner
from core.homodyne_sim import DetectorModel, HomodyneSimulator
from core.quantization_entropy import NoisePartition, auto_adc, entropy_report, quantize
from core.rf_network import FrequencySweep, attenuator_network, stability_factors
from core.stat_tests import BitSequence, default_tests, run_suite
from core.toeplitz_extractor import (
    ExtractorConfig,
    SizingMode,
    ToeplitzSeed,
    effective_rate,
    extract_stream,
    size_output,
)

# step 1. detector design numbers
designer = DetectorDesigner(mode=CalcMode.PAPER_LITERAL)
print("--------- Detector Design Test ---------\n")
for row in designer.compare_amplifiers(PHOTODIODE_CATALOG["LSIPD-LD50"], list(AMPLIFIER_CATALOG.values())):
    print(f"{row['amplifier']}: NF {row['noise_figure']['value_db_rounded']} dB, "
          f"output SNR {row['output_snr']['value_db_rounded']} dB")

# step 2. stability of a matched attenuator
sweep = FrequencySweep.linear(0.1e9, 2.0e9, 20)
report = stability_factors(attenuator_network(sweep, 6.0))
print("\n--------- Stability Test ---------\n")
print(f"6 dB attenuator: K={report.records[0].k_factor:.4f}, mu={report.records[0].mu_load:.4f}, "
      f"stable={report.stable_everywhere}")

# step 3. simulated source, quantized
model = DetectorModel(sample_rate=0.8e9, rng_seed=7)
simulator = HomodyneSimulator(model)
measured = simulator.generate_vacuum_stream(1e-3, 1 << 18)
electronic = simulator.generate_vacuum_stream(0.0, 1 << 18, channel=3)
noise = NoisePartition.from_streams(measured.samples, electronic.samples)
adc = auto_adc(noise, 8)
codes = quantize(measured, adc)
ent = entropy_report(codes, noise, adc)
print("\n--------- Entropy Test ---------\n")
print(f"sigma_q={noise.sigma_q:.4g} V sigma_e={noise.sigma_e:.4g} V delta={adc.bin_width:.4g} V")
print(f"H_min conditional {ent.h_min_conditional:.4f} bits, empirical {ent.h_min_empirical:.4f} bits, safe={ent.safe}")

# Step 4: size and run the extractor
m_out = size_output(2207, ent.h_min_per_bit, 1e-50, SizingMode.STANDARD_LOG2)
cfg = ExtractorConfig(2207, m_out)
result = extract_stream(codes.codes, 8, cfg, ToeplitzSeed.from_int(7, cfg.seed_length), channels=4)
print("\n--------- Extractor Test ---------\n")
print(f"m_out={m_out}, blocks={result.blocks}, output bits={result.output_bits}")
print(f"effective rate {effective_rate(4, 0.8e9, 8, m_out, 2207) / 1e9:.4f} Gbps")

# Step 5: test suite on the extracted bits
bits = result.merged_bits()
seq_len = bits.size // 10
sequences = [BitSequence(bits[i * seq_len:(i + 1) * seq_len]) for i in range(10)]
suite = run_suite(sequences, tests=default_tests(serial_m=4, apen_m=2))
print("\n--------- Statistical Test Suite ---------\n")
for name, proportion, ok in suite.rows():
    print(f"{name:<26} {proportion:.2f} {'ok' if ok else 'outside CI'}")
print(f"\nmean extracted bit {np.mean(bits):.4f}")
