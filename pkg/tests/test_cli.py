import json

import pytest
from pytest import approx, mark

from cli.commands import EXIT_APPLICABILITY, EXIT_CONFIG, EXIT_DOMAIN, EXIT_OK, EXIT_PARSE, exit_code_for, main
from cli.parser import build_parser
from core.errors import (
    ApplicabilityError,
    CalibrationError,
    ConfigValidationError,
    DomainError,
    ParseError,
    SingularityError,
    SizingError,
)

SMALL_RUN = """
rng_seed = 42

[detector]
n_samples = 65536

[suite]
sequence_len = 20000
batch_size = 10
serial_m = 5
apen_m = 3
"""


def run(tmp_path, *args, config=None):
    argv = list(args) + ["--out", str(tmp_path / "out")]
    if config is not None:
        path = tmp_path / "run.toml"
        path.write_text(config)
        argv += ["--config", str(path)]
    return main(argv)


def report(tmp_path, command, out="out"):
    return json.loads((tmp_path / out / command / "report.json").read_text())


@mark.parametrize("exc, code", [
    (ConfigValidationError(["x: unknown key"]), EXIT_CONFIG),
    (DomainError("bad"), EXIT_DOMAIN),
    (SingularityError("singular", 1e9), EXIT_DOMAIN),
    (SizingError("none"), EXIT_DOMAIN),
    (CalibrationError("flat"), EXIT_DOMAIN),
    (ParseError("bad row", 3), EXIT_PARSE),
    (ApplicabilityError("short"), EXIT_APPLICABILITY),
    (ValueError("other"), 1),
])
def test_exit_code_mapping(exc, code):
    assert exit_code_for(exc) == code


def test_common_options_are_accepted_after_the_command():
    args = build_parser().parse_args(["design-snr", "--seed", "0x10", "--mode", "paper-literal", "--workers", "2"])
    assert (args.command, args.seed, args.mode, args.workers) == ("design-snr", 16, "paper-literal", 2)


@mark.parametrize("argv", [["design-snr", "--workers", "0"], ["design-snr", "--seed", "-1"], ["frobnicate"]])
def test_bad_arguments_are_rejected(argv):
    with pytest.raises(SystemExit):
        build_parser().parse_args(argv)


def test_design_snr(tmp_path):
    assert run(tmp_path, "design-snr", "--photodiode", "LSIPD-LD50") == EXIT_OK
    doc = report(tmp_path, "design-snr")
    assert doc["snr"]["value_db"] == approx(82.125, abs=1e-3)
    assert doc["mode"] == "standard"
    assert (tmp_path / "out" / "design-snr" / "photodiodes.csv").exists()
    assert (tmp_path / "out" / "design-snr" / "timestamps.json").exists()
    assert "timestamp" not in json.dumps(doc)


def test_design_cascade_modes(tmp_path):
    assert run(tmp_path, "design-cascade", "--mode", "paper-literal", "--amplifier", "ABA-52563") == EXIT_OK
    doc = report(tmp_path, "design-cascade")
    assert doc["mode"] == "paper_literal"
    assert doc["chains"][0]["noise_figure"]["value_db"] == approx(3.40698, abs=1e-4)
    assert doc["chains"][0]["output_snr"]["value_db"] == approx(37.454, abs=1e-2)


def test_unknown_config_key_exits_with_config_code(tmp_path):
    assert run(tmp_path, "design-snr", config="[adc]\nbitz = 8\n") == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["design-snr", "--config", str(tmp_path / "none.toml")]) == EXIT_CONFIG


def test_missing_bit_file(tmp_path):
    assert run(tmp_path, "test", "--bits", str(tmp_path / "none.bin")) == EXIT_DOMAIN


def test_malformed_touchstone_exits_with_parse_code(tmp_path):
    (tmp_path / "bad.s2p").write_text("# GHZ S MA R 50\n1 0 0\n")
    assert run(tmp_path, "stability", config='[network]\ntouchstone = "bad.s2p"\n') == EXIT_PARSE


def test_too_short_sequences_exit_with_applicability_code(tmp_path):
    config = "[suite]\nsequence_len = 100\nbatch_size = 10\nserial_m = 5\n"
    assert run(tmp_path, "test", config=config) == EXIT_APPLICABILITY


def test_stability_of_default_network(tmp_path):
    assert run(tmp_path, "stability") == EXIT_OK
    doc = report(tmp_path, "stability")
    assert doc["command"] == "stability"
    assert len(doc["config_digest"]) == 64


@mark.slow
def test_pipeline_is_reproducible_across_runs_and_workers(tmp_path):
    assert run(tmp_path, "pipeline", config=SMALL_RUN) == EXIT_OK
    assert main(["pipeline", "--config", str(tmp_path / "run.toml"),
                 "--out", str(tmp_path / "again"), "--workers", "3"]) == EXIT_OK

    first, second = tmp_path / "out" / "pipeline", tmp_path / "again" / "pipeline"
    assert (first / "extracted.bin").stat().st_size > 0
    assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()
    assert (first / "extracted.bin").read_bytes() == (second / "extracted.bin").read_bytes()

    doc = report(tmp_path, "pipeline")
    assert doc["m_out"] < doc["n_in"]
    assert doc["extraction"]["output_bits"] >= 20000 * 10
    assert doc["entropy"]["safe"]


@mark.slow
def test_pipeline_bits_pass_the_suite_at_full_scale(tmp_path):
    assert run(tmp_path, "pipeline", config="rng_seed = 42\n") == EXIT_OK
    doc = report(tmp_path, "pipeline")
    suite = doc["suite"]
    assert suite["batch_size"] == 100
    assert suite["alpha"] == 0.01
    assert len(suite["tests"]) == 9
    assert len(suite["tests"]["monobit_frequency"]["p_values"]) == 100
    for name, row in suite["tests"].items():
        assert suite["ci_low"] <= row["proportion"] <= suite["ci_high"], name
        assert row["within_ci"], name
    assert doc["all_passed"]


INLINE_DESIGN = """
[[design.photodiodes]]
label = "BENCH-PD"
responsivity = 0.9
dark_current = 5e-12
shunt_resistance = 100e9
junction_capacitance = 0.8e-12
bandwidth = 3e9

[[design.amplifier_specs]]
label = "BENCH-LNA"
gain_db = 20
noise_figure_db = 1.5
bandwidth = 4e9
"""


def test_design_commands_accept_inline_components(tmp_path):
    # same numbers as LSIPD-LD50, so the SNR must match the catalog part
    assert run(tmp_path, "design-snr", "--photodiode", "BENCH-PD", config=INLINE_DESIGN) == EXIT_OK
    doc = report(tmp_path, "design-snr")
    assert doc["photodiode"] == "BENCH-PD"
    assert doc["snr"]["value_db"] == approx(82.125, abs=1e-3)

    assert run(tmp_path, "design-cascade", "--photodiode", "BENCH-PD", "--amplifier", "BENCH-LNA",
               config=INLINE_DESIGN) == EXIT_OK
    doc = report(tmp_path, "design-cascade")
    assert [c["amplifier"] for c in doc["chains"]] == ["BENCH-LNA"]


def test_unknown_component_label_exits_with_domain_code(tmp_path):
    assert run(tmp_path, "design-cascade", "--amplifier", "NOPE") == EXIT_DOMAIN
