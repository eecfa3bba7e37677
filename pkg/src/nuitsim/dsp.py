"""Near-ultrasound payload generation by single upper-sideband modulation, and recovery checks."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

OUTPUT_RATE = 48_000


class NyquistError(ValueError):
    """Requested frequencies do not fit below half the sample rate."""


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError("audio must be mono (1-D)")
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2

    def with_samples(self, samples: np.ndarray) -> AudioBuffer:
        return AudioBuffer(samples, self.sample_rate)


@dataclass(frozen=True)
class ModulationParams:
    cutoff_hz: float = 6000.0
    carrier_hz: float = 16000.0
    tukey_alpha: float = 0.05
    peak_target: float = 0.9
    filter_taps: int = 511

    def __post_init__(self):
        if not 0 <= self.tukey_alpha <= 1:
            raise ValueError(f"tukey_alpha must lie in [0, 1], got {self.tukey_alpha}")
        if self.filter_taps < 1 or self.filter_taps % 2 == 0:
            raise ValueError(f"filter_taps must be a positive odd number, got {self.filter_taps}")
        if not 0 < self.peak_target <= 1:
            raise ValueError(f"peak_target must lie in (0, 1], got {self.peak_target}")
        if self.cutoff_hz <= 0 or self.carrier_hz <= 0:
            raise ValueError("cutoff_hz and carrier_hz must be positive")

    def check_rate(self, sample_rate: float) -> None:
        if self.cutoff_hz + self.carrier_hz > sample_rate / 2:
            raise NyquistError(
                f"carrier {self.carrier_hz:g} Hz + bandwidth {self.cutoff_hz:g} Hz exceeds Nyquist "
                f"{sample_rate / 2:g} Hz"
            )


def lowpass_kernel(cutoff_hz: float, sample_rate: float, taps: int) -> np.ndarray:
    """Hamming-windowed sinc with unit DC gain."""
    if taps % 2 == 0:
        raise ValueError("taps must be odd for a symmetric linear-phase kernel")
    fc = cutoff_hz / sample_rate
    n = np.arange(taps) - (taps - 1) / 2
    h = 2 * fc * np.sinc(2 * fc * n) * np.hamming(taps)
    return h / h.sum()


def low_pass(audio: AudioBuffer, cutoff_hz: float, taps: int = 511) -> AudioBuffer:
    """Linear-phase FIR low-pass with the group delay removed; output has the input's length."""
    if not 0 < cutoff_hz < audio.nyquist:
        raise NyquistError(f"cutoff {cutoff_hz:g} Hz must lie in (0, {audio.nyquist:g}) Hz")
    h = lowpass_kernel(cutoff_hz, audio.sample_rate, taps)
    full = np.convolve(audio.samples, h)
    delay = (taps - 1) // 2
    return audio.with_samples(full[delay : delay + len(audio)])


def analytic_signal(audio: AudioBuffer) -> np.ndarray:
    """x + j*H{x} built in the frequency domain (negative bins zeroed, positive bins doubled)."""
    x = audio.samples
    n = len(x)
    if n < 2:
        raise ValueError("need at least two samples")
    spectrum = np.fft.fft(x)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1 : n // 2] = 2.0
    else:
        gain[1 : (n + 1) // 2] = 2.0
    return np.fft.ifft(spectrum * gain)


def _carrier(n: int, carrier_hz: float, sample_rate: float) -> tuple[np.ndarray, np.ndarray]:
    phase = 2 * np.pi * carrier_hz * np.arange(n) / sample_rate
    return np.cos(phase), np.sin(phase)


def ssb_modulate(audio: AudioBuffer, carrier_hz: float, cutoff_hz: float = 6000.0) -> AudioBuffer:
    """Upper-sideband shift: m*cos(wc t) - H{m}*sin(wc t)."""
    if carrier_hz + cutoff_hz > audio.nyquist:
        raise NyquistError(
            f"carrier {carrier_hz:g} Hz + bandwidth {cutoff_hz:g} Hz exceeds Nyquist {audio.nyquist:g} Hz"
        )
    z = analytic_signal(audio)
    cos, sin = _carrier(len(audio), carrier_hz, audio.sample_rate)
    return audio.with_samples(z.real * cos - z.imag * sin)


def tukey_window(n: int, alpha: float) -> np.ndarray:
    """Tapered cosine: flat over a fraction 1 - alpha, raised-cosine edges over alpha."""
    if n < 2:
        raise ValueError("window length must be at least 2")
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0:
        return np.ones(n)
    x = np.arange(n) / (n - 1)
    w = np.ones(n)
    head = x < alpha / 2
    tail = x > 1 - alpha / 2
    w[head] = 0.5 * (1 - np.cos(2 * np.pi * x[head] / alpha))
    w[tail] = 0.5 * (1 - np.cos(2 * np.pi * (1 - x[tail]) / alpha))
    return w


def normalize_peak(audio: AudioBuffer, target: float = 0.9) -> AudioBuffer:
    if not 0 < target <= 1:
        raise ValueError(f"target must lie in (0, 1], got {target}")
    peak = np.max(np.abs(audio.samples)) if len(audio) else 0.0
    if peak == 0:
        return audio
    return audio.with_samples(audio.samples * (target / peak))


PCM16_SCALE = 32767


def quantize_pcm16(audio: AudioBuffer | np.ndarray) -> np.ndarray:
    """Scale by 32767, round half away from zero, saturate to int16."""
    x = audio.samples if isinstance(audio, AudioBuffer) else np.asarray(audio, dtype=float)
    scaled = x * PCM16_SCALE
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, -32768, 32767).astype(np.int16)


def dequantize_pcm16(samples: np.ndarray) -> np.ndarray:
    return np.asarray(samples, dtype=float) / PCM16_SCALE


def resample_to(audio: AudioBuffer, rate: int) -> AudioBuffer:
    if audio.sample_rate == rate:
        return audio
    ratio = Fraction(rate, int(audio.sample_rate))
    y = resample_poly(audio.samples, ratio.numerator, ratio.denominator)
    return AudioBuffer(y, rate)


def prepare_message(audio: AudioBuffer, params: ModulationParams = ModulationParams()) -> AudioBuffer:
    """Front half of the pipeline: rate lift, band-limit, normalise."""
    if audio.sample_rate < OUTPUT_RATE:
        audio = resample_to(audio, OUTPUT_RATE)
    params.check_rate(audio.sample_rate)
    band = low_pass(audio, params.cutoff_hz, params.filter_taps)
    return normalize_peak(band, params.peak_target)


def modulate_pipeline(audio: AudioBuffer, params: ModulationParams = ModulationParams()) -> AudioBuffer:
    """Resample (if below 48 kHz), low-pass, normalise, SSB-shift, Tukey-window, normalise.

    Quantisation to PCM16 happens when the result is written.
    """
    message = prepare_message(audio, params)
    shifted = ssb_modulate(message, params.carrier_hz, params.cutoff_hz)
    if len(shifted) >= 2:
        shifted = shifted.with_samples(shifted.samples * tukey_window(len(shifted), params.tukey_alpha))
    return normalize_peak(shifted, params.peak_target)


def demodulate_coherent(audio: AudioBuffer, carrier_hz: float = 16000.0, cutoff_hz: float = 6000.0,
                        taps: int = 511) -> AudioBuffer:
    """Mix down with 2*cos(wc t) and low-pass."""
    if carrier_hz >= audio.nyquist:
        raise NyquistError(f"carrier {carrier_hz:g} Hz is not below Nyquist {audio.nyquist:g} Hz")
    cos, _ = _carrier(len(audio), carrier_hz, audio.sample_rate)
    return low_pass(audio.with_samples(2 * audio.samples * cos), cutoff_hz, taps)


def demodulate_square_law(audio: AudioBuffer, cutoff_hz: float = 6000.0, taps: int = 511,
                          remove_dc: bool = True) -> AudioBuffer:
    """Quadratic front-end model: square, low-pass, drop the mean."""
    y = low_pass(audio.with_samples(audio.samples**2), cutoff_hz, taps)
    if remove_dc and len(y):
        return y.with_samples(y.samples - y.samples.mean())
    return y


def band_energy_ratio(audio: AudioBuffer, f_lo: float, f_hi: float) -> float:
    """10*log10(in-band / out-of-band periodogram energy) over [f_lo, f_hi].

    Raises ValueError on a zero-energy signal; returns +inf when nothing lies out of band.
    """
    if not 0 <= f_lo < f_hi <= audio.nyquist:
        raise ValueError(f"band [{f_lo:g}, {f_hi:g}] Hz must satisfy 0 <= lo < hi <= {audio.nyquist:g}")
    power = np.abs(np.fft.rfft(audio.samples)) ** 2
    freqs = np.fft.rfftfreq(len(audio), 1 / audio.sample_rate)
    inside = (freqs >= f_lo) & (freqs <= f_hi)
    e_in = float(power[inside].sum())
    e_out = float(power[~inside].sum())
    if e_in + e_out == 0:
        raise ValueError("signal has zero energy; band ratio undefined")
    if e_out == 0:
        return float("inf")
    if e_in == 0:
        return float("-inf")
    return 10 * np.log10(e_in / e_out)


def peak_frequency(audio: AudioBuffer) -> float:
    power = np.abs(np.fft.rfft(audio.samples)) ** 2
    return float(np.fft.rfftfreq(len(audio), 1 / audio.sample_rate)[int(np.argmax(power))])


def flat_region(n: int, alpha: float, margin: int = 0) -> slice:
    """Indices where a Tukey(alpha) window equals 1, shrunk by ``margin`` samples each side."""
    edge = int(np.ceil(alpha / 2 * (n - 1))) + margin
    return slice(edge, max(edge, n - edge))


def correlation(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.corrcoef(a, b)[0, 1])
