"""Radar chirp configuration and the resolution/range figures derived from it.

The default field values describe the short-range indoor setup this project
is built around: 35 MHz/us chirps sampled at 2 MSa/s with 64 complex samples
per chirp, 40 chirps per frame, and a 4-element uniform linear receive array.
That configuration gives a 1.12 GHz sampled bandwidth, ~13.4 cm range
resolution, ~8.57 m maximum range, and a 256 Mbps instantaneous data rate.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Every IF sample on the wire is 16-bit I + 16-bit Q.
BYTES_PER_SAMPLE = 4

# Sampled bandwidth above this is not physical for the sensors we model.
MAX_BANDWIDTH_HZ = 4e9


@dataclass(frozen=True)
class RadarConfig:
    """Chirp and sampling parameters of an FMCW radar.

    Attributes:
        chirp_slope: frequency ramp rate S in Hz/s (default 35 MHz/us)
        start_freq: chirp start frequency f_c in Hz
        sample_rate: IF ADC rate in samples/s
        n_samples: complex samples recorded per chirp
        n_chirps: chirps per frame
        n_rx: receive channels
        rx_spacing: receive element pitch in meters; None means half a
            wavelength at start_freq (uniform linear array)
        chirp_period: chirp repetition interval within a frame, seconds
        frame_period: frame repetition interval, seconds
        tx_amplitude: transmit amplitude scale (dimensionless)
    """

    chirp_slope: float = 35e6 / 1e-6
    start_freq: float = 77e9
    sample_rate: float = 2e6
    n_samples: int = 64
    n_chirps: int = 40
    n_rx: int = 4
    rx_spacing: float | None = None
    chirp_period: float = 200e-6
    frame_period: float = 0.1
    tx_amplitude: float = 1.0

    def __post_init__(self):
        for name in ("chirp_slope", "start_freq", "sample_rate",
                     "chirp_period", "frame_period"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("n_samples", "n_chirps", "n_rx"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {value!r}")
        if self.tx_amplitude < 0:
            raise ValueError("tx_amplitude must be non-negative")
        if self.rx_spacing is None:
            half_wavelength = SPEED_OF_LIGHT / self.start_freq / 2.0
            object.__setattr__(self, "rx_spacing", half_wavelength)
        elif self.rx_spacing <= 0:
            raise ValueError("rx_spacing must be positive")
        bandwidth = self.chirp_slope * self.n_samples / self.sample_rate
        if bandwidth > MAX_BANDWIDTH_HZ:
            raise ValueError(
                f"sampled bandwidth {bandwidth / 1e9:.2f} GHz exceeds the "
                f"{MAX_BANDWIDTH_HZ / 1e9:.0f} GHz limit")

    @property
    def frame_bytes(self) -> int:
        """Size of one raw frame on the wire."""
        return self.n_chirps * self.n_rx * self.n_samples * BYTES_PER_SAMPLE


@dataclass(frozen=True)
class DerivedParams:
    """Resolution, range, and rate figures implied by a RadarConfig.

    Attributes:
        bandwidth: sampled chirp bandwidth B in Hz
        d_res: range resolution c/(2B) in meters
        d_max: maximum unambiguous range in meters
        theta_res_boresight: angular resolution at boresight in radians
        wavelength: carrier wavelength c/f_c in meters
        chirp_sample_window: ADC capture window per chirp in seconds
        instantaneous_bit_rate: raw sample rate on the wire in bits/s
    """

    bandwidth: float
    d_res: float
    d_max: float
    theta_res_boresight: float
    wavelength: float
    chirp_sample_window: float
    instantaneous_bit_rate: float


def derive_params(config: RadarConfig) -> DerivedParams:
    """Compute the derived figures for a radar configuration.

    The maximum range uses d_max = f_samp * c / (2 S): the factor of two is
    required for the unambiguous range of complex IF sampling, and d_max then
    equals n_samples * d_res so the range FFT bins exactly tile [0, d_max).
    """
    bandwidth = config.chirp_slope * config.n_samples / config.sample_rate
    d_res = SPEED_OF_LIGHT / (2.0 * bandwidth)
    d_max = config.sample_rate * SPEED_OF_LIGHT / (2.0 * config.chirp_slope)
    return DerivedParams(
        bandwidth=bandwidth,
        d_res=d_res,
        d_max=d_max,
        theta_res_boresight=2.0 / config.n_rx,
        wavelength=SPEED_OF_LIGHT / config.start_freq,
        chirp_sample_window=config.n_samples / config.sample_rate,
        instantaneous_bit_rate=config.sample_rate * BYTES_PER_SAMPLE * 8 * config.n_rx,
    )


def if_frequency(config: RadarConfig, range_m: float) -> float:
    """IF tone frequency produced by a reflector at the given range.

    f_IF = 2 * S * d / c. Zero range is allowed and maps to 0 Hz.
    """
    if range_m < 0:
        raise ValueError(f"range must be non-negative, got {range_m}")
    return 2.0 * config.chirp_slope * range_m / SPEED_OF_LIGHT


_INT_FIELDS = {"n_samples", "n_chirps", "n_rx"}


def load_config(path: str | Path) -> RadarConfig:
    """Read a RadarConfig from a plain-text key=value file.

    One `key = value` pair per line, keys matching the RadarConfig field
    names; blank lines and lines starting with `#` are ignored. Unknown keys
    are rejected. `rx_spacing = auto` (or omitting the key) selects the
    half-wavelength default.
    """
    known = {f.name for f in fields(RadarConfig)}
    values: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, text = line.partition("=")
        key, text = key.strip(), text.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key == "rx_spacing" and text.lower() in ("auto", "none"):
            values[key] = None
        elif key in _INT_FIELDS:
            values[key] = int(text)
        else:
            values[key] = float(text)
    return RadarConfig(**values)


def save_config(config: RadarConfig, path: str | Path) -> None:
    """Write a RadarConfig as a key=value file readable by load_config."""
    lines = ["# radar configuration"]
    for f in fields(RadarConfig):
        value = getattr(config, f.name)
        if f.name in _INT_FIELDS:
            lines.append(f"{f.name} = {int(value)}")
        else:
            lines.append(f"{f.name} = {value!r}")
    Path(path).write_text("\n".join(lines) + "\n")
