import math

import pytest
from pytest import approx, mark

from core.detector_design import (
    AMPLIFIER_CATALOG,
    PHOTODIODE_CATALOG,
    AmplifierStageSpec,
    CalcMode,
    DetectorDesigner,
    Environment,
    cascade_noise_figure,
    detector_output_snr,
    present_db,
    shot_noise_limited_snr,
    snr_from_powers,
)
from core.errors import DomainError


@mark.parametrize(
    "label, expected",
    [
        ("LSIPD-LD50", 82.125),
        ("LSIPD-A75", 76.747),
        ("LSIPD-A40", 75.925),
    ],
)
def test_shot_noise_limited_snr_matches_datasheet_values(label, expected):
    snr = shot_noise_limited_snr(PHOTODIODE_CATALOG[label], Environment(300.0, 1e-3))
    assert snr == approx(expected, abs=1e-3)


def test_ld50_snr_presents_as_82_13():
    snr = shot_noise_limited_snr(PHOTODIODE_CATALOG["LSIPD-LD50"], Environment())
    assert present_db(snr) == 82.13


def test_photodiode_without_shunt_resistance_is_rejected():
    with pytest.raises(DomainError):
        shot_noise_limited_snr(PHOTODIODE_CATALOG["G8195"], Environment())


def test_zero_optical_power_is_rejected():
    with pytest.raises(DomainError):
        shot_noise_limited_snr(PHOTODIODE_CATALOG["LSIPD-LD50"], Environment(300.0, 0.0))


def test_snr_increases_with_optical_power():
    pd = PHOTODIODE_CATALOG["LSIPD-A75"]
    low = shot_noise_limited_snr(pd, Environment(300.0, 1e-3))
    high = shot_noise_limited_snr(pd, Environment(300.0, 2e-3))
    assert high - low == approx(10 * math.log10(2))


@mark.parametrize(
    "label, literal, standard",
    [
        ("ABA-52563", 3.40698, 3.3163),
        ("BGM1013", 4.7014, 4.6008),
        ("BGA2817", 4.0193, 3.9096),
    ],
)
def test_cascade_noise_figure_for_identical_stages(label, literal, standard):
    stage = AMPLIFIER_CATALOG[label]
    assert cascade_noise_figure(stage, stage, CalcMode.PAPER_LITERAL) == approx(literal, abs=1e-4)
    assert cascade_noise_figure(stage, stage, CalcMode.STANDARD) == approx(standard, abs=1e-4)


def test_cascade_with_ideal_first_stage_is_first_stage_figure():
    first = AmplifierStageSpec(math.inf, 2.0, 1e9, "ideal")
    assert cascade_noise_figure(first, AMPLIFIER_CATALOG["BGM1013"]) == 2.0


def test_literal_cascade_with_zero_gain_is_rejected():
    flat = AmplifierStageSpec(0.0, 3.0, 1e9, "flat")
    with pytest.raises(DomainError):
        cascade_noise_figure(flat, flat, CalcMode.PAPER_LITERAL)


def test_cascade_accepts_mode_strings():
    stage = AMPLIFIER_CATALOG["ABA-52563"]
    assert cascade_noise_figure(stage, stage, "standard") == cascade_noise_figure(stage, stage, CalcMode.STANDARD)
    with pytest.raises(DomainError):
        cascade_noise_figure(stage, stage, "bogus")


def test_detector_output_snr_modes():
    assert detector_output_snr(82.13, 3.41, CalcMode.PAPER_LITERAL) == approx(82.13 / 10 ** 0.341)
    assert detector_output_snr(82.13, 3.41, CalcMode.STANDARD) == approx(78.72)


@mark.parametrize(
    "amplifier, expected",
    [
        ("ABA-52563", 37.454),
        ("BGA2817", 32.546),
        ("BGM1013", 27.829),
    ],
)
def test_literal_chain_uses_rounded_intermediates(amplifier, expected):
    designer = DetectorDesigner(mode=CalcMode.PAPER_LITERAL)
    chain = designer.design_chain(PHOTODIODE_CATALOG["LSIPD-LD50"], AMPLIFIER_CATALOG[amplifier])
    assert chain["output_snr"].value_db == approx(expected, abs=1e-3)


def test_standard_chain_subtracts_noise_figure():
    designer = DetectorDesigner(mode=CalcMode.STANDARD)
    chain = designer.design_chain(PHOTODIODE_CATALOG["LSIPD-LD50"], AMPLIFIER_CATALOG["ABA-52563"])
    expected = chain["photodiode_snr"].value_db - chain["noise_figure"].value_db
    assert chain["output_snr"].value_db == approx(expected)


def test_compare_amplifiers_reports_mode():
    designer = DetectorDesigner(mode=CalcMode.PAPER_LITERAL)
    rows = designer.compare_amplifiers(PHOTODIODE_CATALOG["LSIPD-LD50"], list(AMPLIFIER_CATALOG.values()))
    assert [r["amplifier"] for r in rows] == list(AMPLIFIER_CATALOG)
    assert all(r["output_snr"]["mode"] == "paper_literal" for r in rows)


def test_snr_from_powers():
    assert snr_from_powers(1e-3, 1e-6) == approx(30.0)
    with pytest.raises(DomainError):
        snr_from_powers(1e-3, 0.0)
