"""Rayleigh fading, the reflecting-surface cascade, and receiver-side CSI.

The link has a direct path plus N reflected paths; each reflecting element
applies an amplitude and a phase shift, so the end-to-end gain collapses to

    gain = direct + sum_n amplitude_n * exp(j*phase_n) * tx_ris_n * ris_rx_n.

Choosing phase_n = angle(direct) - angle(tx_ris_n) - angle(ris_rx_n) makes
every reflected term co-phase with the direct path, which maximizes |gain|
and yields |direct| + sum_n amplitude_n * |tx_ris_n| * |ris_rx_n|.

All sampling is driven by explicit seeds.  Channel coefficients live in
numpy complex128; the symbol-stream operations (`apply_channel`,
`derotate`) work on autodiff Tensors whose trailing axis of size 2 holds
re/im, and are differentiable with respect to the symbols while the gain
and the noise draw are treated as constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, complex_mul

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of every link coefficient.

    ``direct`` holds the transmitter->receiver path, ``tx_ris`` the
    transmitter->surface paths and ``ris_rx`` the surface->receiver paths.
    Leading axes (if any) are batch axes; the trailing axis of ``tx_ris``
    and ``ris_rx`` indexes the N reflecting elements.
    """

    direct: np.ndarray
    tx_ris: np.ndarray
    ris_rx: np.ndarray

    def __post_init__(self):
        direct = np.asarray(self.direct, dtype=np.complex128)
        tx_ris = np.asarray(self.tx_ris, dtype=np.complex128)
        ris_rx = np.asarray(self.ris_rx, dtype=np.complex128)
        if tx_ris.shape != ris_rx.shape:
            raise ValueError(f"per-element link shapes disagree: {tx_ris.shape} vs {ris_rx.shape}")
        if tx_ris.shape[:-1] != direct.shape:
            raise ValueError(
                f"batch shape mismatch: direct {direct.shape} vs per-element {tx_ris.shape}"
            )
        object.__setattr__(self, "direct", direct)
        object.__setattr__(self, "tx_ris", tx_ris)
        object.__setattr__(self, "ris_rx", ris_rx)

    @property
    def n_elements(self) -> int:
        return self.tx_ris.shape[-1]

    # Amplitude/phase views.  Phases are reduced to [0, 2*pi).
    @property
    def direct_amplitude(self) -> np.ndarray:
        return np.abs(self.direct)

    @property
    def direct_phase(self) -> np.ndarray:
        return np.mod(np.angle(self.direct), TWO_PI)

    @property
    def tx_ris_phase(self) -> np.ndarray:
        return np.mod(np.angle(self.tx_ris), TWO_PI)

    @property
    def ris_rx_phase(self) -> np.ndarray:
        return np.mod(np.angle(self.ris_rx), TWO_PI)


@dataclass(frozen=True)
class ReflectionConfig:
    """Per-element reflection amplitudes (in [0, 1]) and phases (in [0, 2*pi))."""

    amplitude: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        amplitude = np.asarray(self.amplitude, dtype=np.float64)
        phase = np.asarray(self.phase, dtype=np.float64)
        if amplitude.shape != phase.shape:
            raise ValueError(f"amplitude/phase shapes disagree: {amplitude.shape} vs {phase.shape}")
        if np.any(amplitude < 0.0) or np.any(amplitude > 1.0):
            raise ValueError("reflection amplitudes must lie in [0, 1]")
        if np.any(phase < 0.0) or np.any(phase >= TWO_PI):
            raise ValueError("reflection phases must lie in [0, 2*pi)")
        object.__setattr__(self, "amplitude", amplitude)
        object.__setattr__(self, "phase", phase)


@dataclass(frozen=True)
class NoiseModel:
    """Circular complex noise with total variance ``variance`` per symbol
    (``variance / 2`` per real component)."""

    variance: float

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValueError(f"noise variance must be >= 0, got {self.variance}")


@dataclass(frozen=True)
class CsiErrorModel:
    """Multiplicative estimation error: estimate = truth * (1 + e),
    e ~ CN(0, scale**2), independent per coefficient."""

    scale: float

    def __post_init__(self):
        if self.scale < 0.0:
            raise ValueError(f"CSI error scale must be >= 0, got {self.scale}")


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) draws: real and imaginary parts N(0, 1/2)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(n_elements: int, seed) -> ChannelRealization:
    """Draw one realization of all 2N+1 links, i.i.d. CN(0, 1).

    Draw order is fixed (direct, then tx->surface, then surface->rx) so a
    given seed always produces the same coefficients.
    """
    if n_elements < 1:
        raise ValueError(f"need at least one reflecting element, got {n_elements}")
    rng = np.random.default_rng(seed)
    direct = _complex_normal(rng, ())
    tx_ris = _complex_normal(rng, (n_elements,))
    ris_rx = _complex_normal(rng, (n_elements,))
    return ChannelRealization(direct=direct, tx_ris=tx_ris, ris_rx=ris_rx)


def sample_channel_batch(batch: int, n_elements: int, seed) -> ChannelRealization:
    """Draw ``batch`` independent realizations (block fading: one per sentence)."""
    if n_elements < 1:
        raise ValueError(f"need at least one reflecting element, got {n_elements}")
    rng = np.random.default_rng(seed)
    direct = _complex_normal(rng, (batch,))
    tx_ris = _complex_normal(rng, (batch, n_elements))
    ris_rx = _complex_normal(rng, (batch, n_elements))
    return ChannelRealization(direct=direct, tx_ris=tx_ris, ris_rx=ris_rx)


def align_phases(channels: ChannelRealization) -> ReflectionConfig:
    """Co-phase every reflected path with the direct path.

    Element n gets phase (direct_phase - tx_ris_phase_n - ris_rx_phase_n)
    mod 2*pi and amplitude 1/N, the setting that maximizes the magnitude of
    the effective gain under the unit-amplitude-budget convention.
    """
    phase = np.mod(
        channels.direct_phase[..., None] - channels.tx_ris_phase - channels.ris_rx_phase,
        TWO_PI,
    )
    amplitude = np.full_like(phase, 1.0 / channels.n_elements)
    return ReflectionConfig(amplitude=amplitude, phase=phase)


def zero_reflection(n_elements: int, batch_shape: tuple[int, ...] = ()) -> ReflectionConfig:
    """All amplitudes zero: the surface contributes nothing (direct path only)."""
    shape = batch_shape + (n_elements,)
    return ReflectionConfig(amplitude=np.zeros(shape), phase=np.zeros(shape))


def effective_gain(channels: ChannelRealization, reflection: ReflectionConfig) -> np.ndarray:
    """End-to-end complex gain: direct path plus the reflected cascade."""
    if reflection.amplitude.shape[-1] != channels.n_elements:
        raise ValueError(
            f"reflection configured for {reflection.amplitude.shape[-1]} elements, "
            f"channels have {channels.n_elements}"
        )
    cascade = np.sum(
        reflection.amplitude * np.exp(1j * reflection.phase) * channels.tx_ris * channels.ris_rx,
        axis=-1,
    )
    return channels.direct + cascade


def aligned_gain_magnitude(channels: ChannelRealization) -> np.ndarray:
    """Closed form |gain| under phase alignment:
    |direct| + (1/N) * sum_n |tx_ris_n| * |ris_rx_n|."""
    cascade = np.sum(np.abs(channels.tx_ris) * np.abs(channels.ris_rx), axis=-1)
    return np.abs(channels.direct) + cascade / channels.n_elements


def snr_to_sigma(snr_db: float) -> float:
    """Noise variance for a transmit SNR in dB against unit symbol power:
    sigma^2 = 10^(-snr_db / 10)."""
    return float(10.0 ** (-snr_db / 10.0))


def _as_complex_pairs(gain: np.ndarray, target_ndim: int) -> np.ndarray:
    """Shape a scalar or per-row complex gain into broadcastable re/im pairs."""
    gain = np.asarray(gain, dtype=np.complex128)
    pairs = np.stack((gain.real, gain.imag), axis=-1)
    while pairs.ndim < target_ndim:
        pairs = pairs[..., None, :]
    return pairs


def apply_channel(symbols: Tensor, gain: np.ndarray, noise: NoiseModel, seed) -> Tensor:
    """Propagate a (B, M, 2) symbol Tensor through a flat-fading channel.

    Every complex symbol is multiplied by the (per-row, block-fading) gain
    and perturbed by additive circular noise with ``noise.variance`` per
    symbol.  The result stays in the autodiff graph of ``symbols``; the gain
    and the noise draw enter as constants, so gradients flow to the symbols
    only.
    """
    if symbols.shape[-1] != 2:
        raise ValueError(f"symbol streams need a trailing re/im axis, got shape {symbols.shape}")
    pairs = _as_complex_pairs(gain, symbols.ndim)
    faded = complex_mul(symbols, Tensor(pairs))
    rng = np.random.default_rng(seed)
    draw = rng.standard_normal(symbols.shape) * np.sqrt(noise.variance / 2.0)
    return faded + Tensor(draw)


def derotate(received: Tensor, phase: np.ndarray) -> Tensor:
    """Multiply a received symbol Tensor by exp(-j * phase).

    ``phase`` is the receiver's estimate of the direct-path phase, scalar or
    per batch row; magnitudes are untouched.
    """
    if received.shape[-1] != 2:
        raise ValueError(f"symbol streams need a trailing re/im axis, got shape {received.shape}")
    phase = np.asarray(phase, dtype=np.float64)
    phasor = np.exp(-1j * phase)
    pairs = _as_complex_pairs(phasor, received.ndim)
    return complex_mul(received, Tensor(pairs))


def perturb_csi(channels: ChannelRealization, error: CsiErrorModel, seed) -> ChannelRealization:
    """Return the receiver's noisy estimate of a realization.

    Each coefficient is scaled by (1 + e) with an independent e ~ CN(0,
    scale^2); draw order matches `sample_channels`.  A zero scale returns
    bit-identical coefficients.
    """
    rng = np.random.default_rng(seed)
    scale = error.scale
    e_direct = _complex_normal(rng, np.shape(channels.direct)) * scale
    e_tx = _complex_normal(rng, channels.tx_ris.shape) * scale
    e_rx = _complex_normal(rng, channels.ris_rx.shape) * scale
    return ChannelRealization(
        direct=channels.direct * (1.0 + e_direct),
        tx_ris=channels.tx_ris * (1.0 + e_tx),
        ris_rx=channels.ris_rx * (1.0 + e_rx),
    )
