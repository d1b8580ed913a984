"""Short-time Fourier transform and its inverse.

Analysis takes hann-windowed frames of a real signal and keeps the
one-sided spectrum. Synthesis overlap-adds windowed inverse FFTs and
divides by the overlap-added squared window, which reconstructs the
input exactly (to rounding) for any config that passes the
constant-overlap-add check in StftConfig.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigMismatch, EmptySignal
from .core import Spectrogram, StftConfig, Waveform


def stft(w: Waveform, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Forward transform to (channels, frames, fft_size // 2 + 1).

    With center_pad, frame t is centered on sample t * hop and the frame
    count is length // hop + 1.
    """
    if w.length < 1:
        raise EmptySignal("cannot transform an empty signal")
    n, hop = cfg.fft_size, cfg.hop
    window = cfg.window_array()
    x = w.samples
    if cfg.center_pad:
        x = np.pad(x, ((0, 0), (n // 2, n // 2)))
        frames = w.length // hop + 1
    else:
        if w.length < n:
            raise EmptySignal(
                f"signal of {w.length} samples is shorter than one {n}-sample frame; "
                "enable center_pad"
            )
        frames = (w.length - n) // hop + 1
    idx = np.arange(frames)[:, None] * hop + np.arange(n)[None, :]
    segments = x[:, idx] * window
    return Spectrogram(np.fft.rfft(segments, axis=-1), cfg, w.sample_rate)


def istft(s: Spectrogram, cfg: StftConfig | None = None, length: int | None = None) -> Waveform:
    """Inverse transform via normalized overlap-add.

    `cfg`, when given, must equal the config the spectrogram was made
    with. `length` trims/selects the output extent; it defaults to
    (frames - 1) * hop, the shortest signal length consistent with the
    frame count.
    """
    if cfg is not None and cfg != s.config:
        raise ConfigMismatch(f"spectrogram was produced with {s.config}, not {cfg}")
    cfg = s.config
    n, hop = cfg.fft_size, cfg.hop
    frames = s.frames
    if frames < 1:
        raise EmptySignal("spectrogram has no frames")
    window = cfg.window_array()

    frames_td = np.fft.irfft(s.bins, n=n, axis=-1) * window  # (channels, frames, n)
    total = (frames - 1) * hop + n
    acc = np.zeros((s.channels, total))
    envelope = np.zeros(total)
    wsq = window * window
    for t in range(frames):  # fixed order keeps the reduction deterministic
        acc[:, t * hop:t * hop + n] += frames_td[:, t]
        envelope[t * hop:t * hop + n] += wsq
    out = acc / np.maximum(envelope, 1e-12)

    start = n // 2 if cfg.center_pad else 0
    available = total - start
    if length is None:
        length = (frames - 1) * hop
    if length > available:
        raise ConfigMismatch(
            f"requested {length} samples but only {available} are reconstructable "
            f"from {frames} frames"
        )
    return Waveform(out[:, start:start + length], s.sample_rate)


def magnitude(s: Spectrogram) -> np.ndarray:
    """Elementwise modulus, shape (channels, frames, bins)."""
    return np.abs(s.bins)
