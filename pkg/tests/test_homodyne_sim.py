import numpy as np
import pytest
from pytest import approx, mark

from core.errors import DomainError
from core.homodyne_sim import (
    DetectorModel,
    HomodyneSimulator,
    SampleStream,
    gain_ratio_for_cmrr,
    generate_cm_tone_streams,
    generate_vacuum_stream,
)

N = 1 << 18
FLAT = DetectorModel(f3db=1e15, rng_seed=3)


def test_flat_stream_variance_matches_psd():
    stream = generate_vacuum_stream(FLAT, 1e-3, 1 << 20)
    expected = (1e-12 + 1e-16) * FLAT.sample_rate / 2
    assert stream.variance == approx(expected, rel=0.01)
    assert stream.sample_rate == FLAT.sample_rate
    assert stream.lo_power == 1e-3


def test_same_seed_gives_identical_streams():
    a = generate_vacuum_stream(DetectorModel(rng_seed=5), 1e-3, N)
    b = generate_vacuum_stream(DetectorModel(rng_seed=5), 1e-3, N)
    c = generate_vacuum_stream(DetectorModel(rng_seed=6), 1e-3, N)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_shot_and_electronic_components_are_uncorrelated():
    shot, elec = HomodyneSimulator(FLAT).generate_components(1e-3, 1 << 20)
    assert abs(np.corrcoef(shot, elec)[0, 1]) < 5e-3


def test_shot_variance_scales_linearly_with_lo_power():
    simulator = HomodyneSimulator(FLAT)
    full, _ = simulator.generate_components(1e-3, N)
    half, _ = simulator.generate_components(0.5e-3, N)
    assert np.var(full) / np.var(half) == approx(2.0)


def test_lo_power_above_saturation_is_clamped():
    simulator = HomodyneSimulator(DetectorModel(saturation_power=2e-3))
    at_limit, _ = simulator.generate_components(2e-3, N)
    above, _ = simulator.generate_components(3e-3, N)
    assert np.array_equal(at_limit, above)


def test_zero_lo_power_leaves_electronic_noise_only():
    stream = HomodyneSimulator(FLAT).generate_vacuum_stream(0.0, 1 << 20)
    assert stream.variance == approx(1e-16 * FLAT.sample_rate / 2, rel=0.01)


def test_response_is_half_at_corner():
    model = DetectorModel(f3db=1e9)
    assert model.response(np.array([1e9]))[0] == approx(0.5)


def test_ripple_shapes_response():
    model = DetectorModel(f3db=1e15, ripple_db=1.0, ripple_period=4e8)
    response_db = 10 * np.log10(model.response(np.linspace(0, 2e9, 2001)))
    assert response_db.max() == approx(1.0, abs=1e-3)
    assert response_db.min() == approx(-1.0, abs=1e-3)


def test_flicker_term_raises_low_frequency_noise():
    model = DetectorModel(elec_noise_psd=1e-16, flicker_corner=1e7)
    psd = model.elec_psd(np.array([1e6, 1e9]))
    assert psd[0] == approx(1.1e-15)
    assert psd[1] == approx(1.01e-16)


@mark.parametrize(
    "field, value",
    [
        ("sample_rate", 0.0),
        ("f3db", -1.0),
        ("saturation_power", 0.0),
        ("pd_gain_ratio", 0.0),
        ("elec_noise_psd", -1e-16),
        ("ripple_db", -1.0),
    ],
)
def test_invalid_models_are_rejected(field, value):
    with pytest.raises(DomainError):
        HomodyneSimulator(DetectorModel(**{field: value}))


def test_negative_lo_power_is_rejected():
    with pytest.raises(DomainError):
        generate_vacuum_stream(DetectorModel(), -1e-3, N)


def test_empty_or_non_finite_streams_are_rejected():
    with pytest.raises(DomainError):
        SampleStream(np.array([]), 1e9, 1e-3)
    with pytest.raises(DomainError):
        SampleStream(np.array([0.0, np.nan]), 1e9, 1e-3)


def test_tone_must_be_below_nyquist():
    with pytest.raises(DomainError):
        generate_cm_tone_streams(DetectorModel(sample_rate=1e9), 1e-3, 6e8, 0.5, N)
    with pytest.raises(DomainError):
        generate_cm_tone_streams(DetectorModel(sample_rate=1e9), 1e-3, 1e8, 1.5, N)


def test_matched_photodiodes_cancel_the_tone():
    model = DetectorModel(sample_rate=1e9, pd_gain_ratio=1.0, rng_seed=9)
    single, balanced = generate_cm_tone_streams(model, 1e-3, 1e8, 0.5, N)
    shot, elec = HomodyneSimulator(model).generate_components(1e-3, N, channel=2)
    assert np.array_equal(balanced.samples, shot + elec)
    assert single.lo_power == 0.5e-3


def test_gain_ratio_for_cmrr():
    assert gain_ratio_for_cmrr(30.0) == approx(0.96838, abs=1e-5)
    assert gain_ratio_for_cmrr(20.0) == approx(0.9)
