"""RIFF/WAVE PCM16 reading and canonical 44-byte-header writing."""

from __future__ import annotations

import struct

import numpy as np

from .dsp import AudioBuffer, dequantize_pcm16, quantize_pcm16

WAVE_FORMAT_PCM = 1


class WavFormatError(ValueError):
    pass


def encode_wav(audio: AudioBuffer) -> bytes:
    pcm = quantize_pcm16(audio).astype("<i2").tobytes()
    rate = int(audio.sample_rate)
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, 1, rate, rate * 2, 2, 16)
    return header + b"fmt " + struct.pack("<I", 16) + fmt + b"data" + struct.pack("<I", len(pcm)) + pcm


def write_wav(path, audio: AudioBuffer) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_wav(audio))


def decode_wav(data: bytes) -> AudioBuffer:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("missing RIFF/WAVE header")
    pos = 12
    fmt = None
    pcm = None
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise WavFormatError("truncated 'fmt ' chunk")
            fmt = struct.unpack_from("<HHIIHH", body)
        elif chunk_id == b"data":
            # tolerate a data chunk cut short by a truncated file
            pcm = body
            if fmt is not None:
                break
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise WavFormatError("missing 'fmt ' chunk")
    if pcm is None:
        raise WavFormatError("missing 'data' chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if tag != WAVE_FORMAT_PCM:
        raise WavFormatError(f"unsupported encoding: format tag {tag:#06x} (need PCM, tag 1)")
    if bits != 16:
        raise WavFormatError(f"unsupported encoding: {bits}-bit PCM (need 16-bit)")
    if channels not in (1, 2):
        raise WavFormatError(f"unsupported channel count {channels}")
    frames = len(pcm) // block_align
    samples = np.frombuffer(pcm[: frames * block_align], dtype="<i2").reshape(frames, channels)
    return AudioBuffer(dequantize_pcm16(samples).mean(axis=1), rate)


def read_wav(path) -> AudioBuffer:
    """PCM16 mono or stereo; stereo is averaged to mono."""
    with open(path, "rb") as fh:
        return decode_wav(fh.read())
