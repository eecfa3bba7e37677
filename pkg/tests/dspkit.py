"""Signal fixtures and analytic references shared by DSP tests and acceptance."""

import numpy as np

from nuitsim.dsp import (
    AudioBuffer,
    ModulationParams,
    analytic_signal,
    correlation,
    demodulate_coherent,
    demodulate_square_law,
    flat_region,
    low_pass,
    modulate_pipeline,
    prepare_message,
    ssb_modulate,
    tukey_window,
)

RATE = 48_000


def tone(freq, seconds=1.0, rate=RATE, amp=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t), rate)


def chirp(f0=0.0, f1=5000.0, seconds=1.0, rate=RATE):
    t = np.arange(int(seconds * rate)) / rate
    phase = 2 * np.pi * (f0 * t + (f1 - f0) * t**2 / (2 * seconds))
    return AudioBuffer(0.5 * np.sin(phase), rate)


def coherent_round_trip(signal, params=ModulationParams()):
    """Correlation of the coherent demodulation with the band-limited input over the flat window."""
    message = prepare_message(signal, params)
    recovered = demodulate_coherent(modulate_pipeline(signal, params), params.carrier_hz, params.cutoff_hz, params.filter_taps)
    region = flat_region(len(message), params.tukey_alpha, margin=params.filter_taps // 2)
    return correlation(recovered.samples[region], message.samples[region])


def square_law_error(signal, params=ModulationParams()):
    """Relative L2 error of the square-law output against LP(g^2 w^2 (m^2 + mhat^2) / 2)."""
    m = prepare_message(signal, params)
    mhat = analytic_signal(m).imag
    w = tukey_window(len(m), params.tukey_alpha)
    shifted = ssb_modulate(m, params.carrier_hz, params.cutoff_hz).samples * w
    gain = params.peak_target / np.max(np.abs(shifted))
    measured = demodulate_square_law(modulate_pipeline(signal, params), params.cutoff_hz, params.filter_taps, remove_dc=False)
    expected = low_pass(m.with_samples(gain**2 * w**2 * (m.samples**2 + mhat**2) / 2), params.cutoff_hz, params.filter_taps)
    region = flat_region(len(m), params.tukey_alpha, margin=params.filter_taps // 2)
    diff = measured.samples[region] - expected.samples[region]
    return float(np.linalg.norm(diff) / np.linalg.norm(expected.samples[region]))
