"""Built-in toy separation models and decoder parameter arithmetic.

The band-mask model splits the spectrum into fixed per-source frequency
bands (with optional uniform leakage) so the full pipeline can run
without any trained network. The multi-decoder spec describes a strided
conv encoder/decoder stack; its parameter count checks that swapping a
single wide decoder for four narrow ones keeps the model size in the
same ballpark, and a seeded random forward pass exercises the shapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import LengthIncompatible
from .core import SourceWaveformSet, Spectrogram, StftConfig, Waveform
from .stft import stft

_STRIDE = 2


@dataclass(frozen=True)
class BandMaskModel:
    """Per-source frequency bands [lo, hi) in Hz plus leakage in [0, 1).

    Bands must tile [0, Nyquist] for any supported sample rate; an
    infinite upper edge means "up to Nyquist". With leakage L, each
    source's mask is (1 - L) on its own band plus L / J everywhere, so
    the masks always sum to one per bin.
    """

    band_edges: Tuple[Tuple[float, float], ...]
    leakage: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.leakage < 1.0:
            raise ValueError(f"leakage must lie in [0, 1), got {self.leakage}")
        if len(self.band_edges) < 1:
            raise ValueError("need at least one band")
        for lo, hi in self.band_edges:
            if lo < 0 or not hi > lo:
                raise ValueError(f"bad band ({lo}, {hi})")
        ordered = sorted(self.band_edges)
        if ordered[0][0] != 0.0:
            raise ValueError("bands must start at 0 Hz")
        for (_, prev_hi), (lo, _) in zip(ordered, ordered[1:]):
            if lo != prev_hi:
                raise ValueError(f"bands leave a gap or overlap at {lo} Hz")

    @classmethod
    def default(cls, leakage: float = 0.1) -> "BandMaskModel":
        """drums 250-2k, bass 0-250, other 2k-8k, vocals 8k-Nyquist."""
        return cls(
            band_edges=(
                (250.0, 2000.0),
                (0.0, 250.0),
                (2000.0, 8000.0),
                (8000.0, math.inf),
            ),
            leakage=leakage,
        )

    def bin_masks(self, sample_rate: int, fft_size: int) -> np.ndarray:
        """(num_sources, fft_size // 2 + 1) masks summing to 1 per bin."""
        nyquist = sample_rate / 2.0
        top = max(hi for _, hi in self.band_edges)
        if top < nyquist:
            raise ValueError(f"bands end at {top} Hz but Nyquist is {nyquist} Hz")
        freqs = np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)
        num_sources = len(self.band_edges)
        hard = np.zeros((num_sources, freqs.size))
        for j, (lo, hi) in enumerate(self.band_edges):
            hard[j] = (freqs >= lo) & (freqs < hi)
        unassigned = hard.sum(axis=0) == 0
        if np.any(unassigned):  # the Nyquist bin when a band ends exactly there
            top_band = int(np.argmax([hi for _, hi in self.band_edges]))
            hard[top_band, unassigned] = 1.0
        return (1.0 - self.leakage) * hard + self.leakage / num_sources


def band_mask_separate(
    mix: Waveform, model: BandMaskModel, cfg: StftConfig = StftConfig()
) -> Tuple[List[np.ndarray], Spectrogram]:
    """Masked magnitude estimates plus the mixture spectrogram."""
    spec = stft(mix, cfg)
    mag = np.abs(spec.bins)
    masks = model.bin_masks(mix.sample_rate, cfg.fft_size)
    return [mag * mask[None, None, :] for mask in masks], spec


@dataclass(frozen=True)
class MultiDecoderSpec:
    """Strided conv encoder plus num_decoders mirrored decoders.

    encoder_channels / decoder_channels list the channel counts before
    and after each layer (length layers + 1); the first decoder entry
    must match the encoder bottleneck width.
    """

    encoder_channels: Tuple[int, ...]
    decoder_channels: Tuple[int, ...]
    num_decoders: int
    kernel_size: int
    layers: int

    def __post_init__(self):
        if self.num_decoders not in (1, 4):
            raise ValueError(f"num_decoders must be 1 or 4, got {self.num_decoders}")
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if self.kernel_size < 1:
            raise ValueError(f"kernel_size must be >= 1, got {self.kernel_size}")
        for name, chain in (("encoder", self.encoder_channels), ("decoder", self.decoder_channels)):
            if len(chain) != self.layers + 1:
                raise ValueError(
                    f"{name}_channels must list {self.layers + 1} widths, got {len(chain)}"
                )
            if any(c < 1 for c in chain):
                raise ValueError(f"{name}_channels must be positive")
        if self.decoder_channels[0] != self.encoder_channels[-1]:
            raise ValueError(
                f"decoder input width {self.decoder_channels[0]} must match "
                f"encoder bottleneck {self.encoder_channels[-1]}"
            )


def demucs_like_spec(
    decoder_hidden: int = 48,
    num_decoders: int = 1,
    *,
    encoder_hidden: int = 48,
    layers: int = 6,
    audio_channels: int = 2,
    num_sources: int = 4,
    kernel_size: int = 8,
) -> MultiDecoderSpec:
    """Constant-width encoder/decoder stack in the waveform-model mold.

    With one decoder the final layer emits all sources' channels; with
    four decoders each emits one source.
    """
    if num_sources % num_decoders:
        raise ValueError(f"{num_sources} sources not divisible by {num_decoders} decoders")
    out_channels = audio_channels * num_sources // num_decoders
    encoder = (audio_channels,) + (encoder_hidden,) * layers
    decoder = (encoder_hidden,) + (decoder_hidden,) * (layers - 1) + (out_channels,)
    return MultiDecoderSpec(encoder, decoder, num_decoders, kernel_size, layers)


def conv_layer_params(in_channels: int, out_channels: int, kernel_size: int) -> int:
    """Weights plus biases of one conv layer."""
    return out_channels * in_channels * kernel_size + out_channels


def conv_param_count(spec: MultiDecoderSpec) -> int:
    """Exact parameter count: encoder plus num_decoders times one decoder."""
    encoder = sum(
        conv_layer_params(cin, cout, spec.kernel_size)
        for cin, cout in zip(spec.encoder_channels, spec.encoder_channels[1:])
    )
    decoder = sum(
        conv_layer_params(cin, cout, spec.kernel_size)
        for cin, cout in zip(spec.decoder_channels, spec.decoder_channels[1:])
    )
    return encoder + spec.num_decoders * decoder


def decoder_interior_weight_count(spec: MultiDecoderSpec) -> int:
    """Weight count of decoder layers between the bottleneck-facing first
    layer and the output layer, totalled over all decoders (no biases)."""
    chain = spec.decoder_channels
    interior = sum(
        chain[i] * chain[i + 1] * spec.kernel_size for i in range(1, spec.layers - 1)
    )
    return spec.num_decoders * interior


def _conv_strided(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """x (cin, length) -> (cout, ~length/stride); pads right to fit."""
    kernel = weight.shape[2]
    length = x.shape[1]
    span = max(length, kernel) - kernel
    pad = (-span) % _STRIDE
    x = np.pad(x, ((0, 0), (0, pad + max(0, kernel - length))))
    windows = np.lib.stride_tricks.sliding_window_view(x, kernel, axis=1)[:, ::_STRIDE]
    return np.einsum("oik,itk->ot", weight, windows)


def _conv_transposed(x: np.ndarray, weight: np.ndarray, out_length: int) -> np.ndarray:
    """x (cin, frames) -> (cout, out_length) via stride-_STRIDE upsampling."""
    cin, frames = x.shape
    cout, kernel = weight.shape[1], weight.shape[2]
    full = np.zeros((cout, (frames - 1) * _STRIDE + kernel))
    for k in range(kernel):
        full[:, k:k + frames * _STRIDE:_STRIDE] += weight[:, :, k].T @ x
    if full.shape[1] < out_length:
        full = np.pad(full, ((0, 0), (0, out_length - full.shape[1])))
    return full[:, :out_length]


def multi_decoder_forward(
    mix: Waveform, spec: MultiDecoderSpec, seed: int = 0
) -> SourceWaveformSet:
    """Shape-checking forward pass with seeded random weights, zero biases.

    Outputs carry no separation semantics; they only prove the stack
    maps an input of any nonzero length to num_sources stems of the
    same length.
    """
    if mix.length < 1:
        raise LengthIncompatible("cannot run the conv stack on an empty signal")
    if mix.channels != spec.encoder_channels[0]:
        raise LengthIncompatible(
            f"input has {mix.channels} channels, spec expects {spec.encoder_channels[0]}"
        )
    rng = np.random.default_rng(seed)

    def draw(cout, cin):
        scale = 1.0 / math.sqrt(cin * spec.kernel_size)
        return rng.normal(0.0, scale, size=(cout, cin, spec.kernel_size))

    encoder_weights = [
        draw(cout, cin)
        for cin, cout in zip(spec.encoder_channels, spec.encoder_channels[1:])
    ]
    decoder_weights = [
        [draw(cout, cin) for cin, cout in zip(spec.decoder_channels, spec.decoder_channels[1:])]
        for _ in range(spec.num_decoders)
    ]

    h = mix.samples
    skip_lengths = [h.shape[1]]
    for weight in encoder_weights:
        h = np.maximum(_conv_strided(h, weight), 0.0)
        skip_lengths.append(h.shape[1])

    stems: List[np.ndarray] = []
    for weights in decoder_weights:
        g = h
        for depth, weight in enumerate(weights):
            target = skip_lengths[spec.layers - 1 - depth]
            # transposed conv wants (cin, cout, k); draw() gave (cout, cin, k)
            g = _conv_transposed(g, np.swapaxes(weight, 0, 1), target)
            if depth < spec.layers - 1:
                g = np.maximum(g, 0.0)
        stems.append(g)

    audio_channels = spec.encoder_channels[0]
    out: List[Waveform] = []
    if spec.num_decoders == 1:
        block = stems[0]
        num_sources = block.shape[0] // audio_channels
        for j in range(num_sources):
            out.append(Waveform(block[j * audio_channels:(j + 1) * audio_channels],
                                mix.sample_rate))
    else:
        for block in stems:
            out.append(Waveform(block, mix.sample_rate))
    return SourceWaveformSet(out)
