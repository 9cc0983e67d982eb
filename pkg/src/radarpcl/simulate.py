"""Point-scatterer scene model and raw IF frame synthesis.

The synthesizer renders the dechirped IF signal directly: each scatterer at
range d contributes a complex tone at f_IF = 2*S*d/c, a constant range phase
2*pi*f_c*t_d (t_d = 2d/c), and a per-element phase 2*pi*(k*spacing/lambda)*
sin(theta) across the receive array. Scenes are stationary within a chirp;
an optional spin rate rotates the scene between chirps of a frame.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT, RadarConfig, derive_params

INT16_FULL_SCALE = 32767
# Strongest per-frame sample maps to 75% of full scale: headroom against
# additive noise without giving up dynamic range.
QUANT_HEADROOM = 0.75


class SaturationError(ValueError):
    """Raised when a fixed quantization scale would clip samples."""


@dataclass(frozen=True)
class PointScatterer:
    """Ideal point reflector at (x, y) meters with a dimensionless amplitude."""

    x: float
    y: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if math.hypot(self.x, self.y) <= 0:
            raise ValueError("scatterer must be at non-zero range")

    @property
    def range_m(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def azimuth_rad(self) -> float:
        """Angle off boresight; boresight is +y, positive toward +x."""
        return math.atan2(self.x, self.y)


@dataclass(frozen=True)
class Scene:
    """A set of point scatterers plus a per-sample complex noise level.

    noise_std is the standard deviation of the additive Gaussian noise on
    each of the I and Q components, in the same (dimensionless) units as the
    scatterer amplitudes. An empty scene yields noise-only frames.
    """

    scatterers: tuple[PointScatterer, ...] = ()
    noise_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    def rotated(self, angle_rad: float) -> "Scene":
        """Scene as seen after the sensor yaws by angle_rad (scene rotates by -angle)."""
        c, s = math.cos(-angle_rad), math.sin(-angle_rad)
        rotated = tuple(
            PointScatterer(c * p.x - s * p.y, s * p.x + c * p.y, p.amplitude)
            for p in self.scatterers)
        return Scene(rotated, self.noise_std)


@dataclass
class RawFrame:
    """One frame of quantized IF samples.

    samples has shape (n_chirps, n_rx, n_samples, 2) with int16 I and Q in
    the last axis, so `samples.tobytes()` is exactly the wire layout:
    I0,Q0,I1,Q1,... with sample fastest, then rx, then chirp.
    """

    samples: np.ndarray
    frame_index: int = 0
    timestamp: float = 0.0

    def __post_init__(self):
        if self.samples.dtype != np.int16 or self.samples.ndim != 4 \
                or self.samples.shape[-1] != 2:
            raise ValueError("samples must be int16 with shape (chirps, rx, samples, 2)")

    @property
    def n_chirps(self) -> int:
        return self.samples.shape[0]

    def to_complex(self) -> np.ndarray:
        """Samples as complex64, shape (n_chirps, n_rx, n_samples)."""
        return (self.samples[..., 0].astype(np.float32)
                + 1j * self.samples[..., 1].astype(np.float32))

    def tobytes(self) -> bytes:
        return np.ascontiguousarray(self.samples).tobytes()

    @classmethod
    def frombytes(cls, data: bytes, config: RadarConfig,
                  frame_index: int = 0, timestamp: float = 0.0) -> "RawFrame":
        shape = (config.n_chirps, config.n_rx, config.n_samples, 2)
        samples = np.frombuffer(data, dtype="<i2").reshape(shape).astype(np.int16)
        return cls(samples, frame_index, timestamp)


def _chirp_matrix(config: RadarConfig, scene: Scene) -> np.ndarray:
    """Noise-free IF samples for one chirp, complex128 (n_rx, n_samples)."""
    out = np.zeros((config.n_rx, config.n_samples), dtype=np.complex128)
    if not scene.scatterers:
        return out
    ranges = np.array([p.range_m for p in scene.scatterers])
    sines = np.array([math.sin(p.azimuth_rad) for p in scene.scatterers])
    amps = np.array([p.amplitude for p in scene.scatterers]) * config.tx_amplitude

    wavelength = SPEED_OF_LIGHT / config.start_freq
    f_if = 2.0 * config.chirp_slope * ranges / SPEED_OF_LIGHT
    phi_range = 2.0 * np.pi * config.start_freq * (2.0 * ranges / SPEED_OF_LIGHT)

    n = np.arange(config.n_samples)
    k = np.arange(config.n_rx)
    # (scatterer, sample) tone and (scatterer, rx) steering phases
    tone = np.exp(1j * (2.0 * np.pi * np.outer(f_if, n) / config.sample_rate
                        + phi_range[:, None]))
    steer = np.exp(1j * 2.0 * np.pi * np.outer(sines, k) * config.rx_spacing / wavelength)
    # sum over scatterers: (rx, sample)
    out += np.einsum("pk,pn->kn", steer, amps[:, None] * tone)
    return out


def synthesize_iq(config: RadarConfig, scene: Scene, seed: int = 0,
                  spin_rate: float = 0.0) -> np.ndarray:
    """Unquantized IF samples for a frame, complex128 (n_chirps, n_rx, n_samples).

    spin_rate is a sensor yaw rate in rad/s applied between chirps (chirp i
    sees the scene rotated by spin_rate * chirp_period * i). Noise is fresh
    per chirp and reproducible from the seed.
    """
    rng = np.random.default_rng(seed)
    frame = np.empty((config.n_chirps, config.n_rx, config.n_samples),
                     dtype=np.complex128)
    if spin_rate == 0.0 or not scene.scatterers:
        frame[:] = _chirp_matrix(config, scene)[None, :, :]
    else:
        for i in range(config.n_chirps):
            frame[i] = _chirp_matrix(
                config, scene.rotated(spin_rate * config.chirp_period * i))
    if scene.noise_std > 0:
        noise = rng.normal(0.0, scene.noise_std, size=frame.shape + (2,))
        frame += noise[..., 0] + 1j * noise[..., 1]
    return frame


def synthesize_frame(config: RadarConfig, scene: Scene, seed: int = 0,
                     spin_rate: float = 0.0, scale: float | None = None,
                     out_of_range: str = "reject",
                     frame_index: int = 0, timestamp: float = 0.0) -> RawFrame:
    """Render a scene into a quantized 16-bit raw frame.

    Args:
        config: radar parameters.
        scene: scatterers and noise level.
        seed: noise seed; synthesis is deterministic given (config, scene,
            seed, spin_rate).
        spin_rate: sensor yaw rate in rad/s applied between chirps.
        scale: fixed quantization scale (LSB per unit amplitude). None picks
            the scale that puts the strongest sample magnitude at 75% of the
            int16 range. A fixed scale that would clip raises SaturationError.
        out_of_range: "reject" raises for scatterers beyond d_max, "warn"
            keeps them (their IF tone aliases, as on real hardware).

    Returns:
        RawFrame with int16 I/Q samples.
    """
    if out_of_range not in ("reject", "warn"):
        raise ValueError("out_of_range must be 'reject' or 'warn'")
    d_max = derive_params(config).d_max
    beyond = [p for p in scene.scatterers if p.range_m >= d_max]
    if beyond:
        msg = (f"{len(beyond)} scatterer(s) at or beyond d_max={d_max:.2f} m "
               f"(nearest offender at {min(p.range_m for p in beyond):.2f} m)")
        if out_of_range == "reject":
            raise ValueError(msg)
        warnings.warn(msg)

    frame = synthesize_iq(config, scene, seed=seed, spin_rate=spin_rate)
    peak = np.abs(frame).max()
    if peak == 0.0:
        quantized = np.zeros(frame.shape + (2,), dtype=np.int16)
        return RawFrame(quantized, frame_index, timestamp)
    if scale is None:
        scale = QUANT_HEADROOM * INT16_FULL_SCALE / peak
    elif scale * peak > INT16_FULL_SCALE:
        raise SaturationError(
            f"scale {scale:.4g} would clip: peak magnitude {peak:.4g} maps to "
            f"{scale * peak:.0f} > {INT16_FULL_SCALE}")
    quantized = np.empty(frame.shape + (2,), dtype=np.int16)
    quantized[..., 0] = np.rint(frame.real * scale).astype(np.int16)
    quantized[..., 1] = np.rint(frame.imag * scale).astype(np.int16)
    return RawFrame(quantized, frame_index, timestamp)
