"""Raw IF frames to normalized range-azimuth model input tensors.

Per chirp: a range FFT over the sample axis, an azimuth FFT over the receive
elements zero-padded to 64 bins and rotated so boresight sits at bin 32,
magnitude, a 45 dB threshold relative to the per-chirp peak, normalization
to [0, 1], and a crop to the central 48 azimuth bins. Stacking the first 40
processed chirps of a frame gives the 40x64x48 network input.

The whole pipeline runs in 32-bit floats.
"""

from __future__ import annotations

import struct
import warnings
from pathlib import Path

import numpy as np
import scipy.fft

from .config import RadarConfig
from .simulate import RawFrame

AZIMUTH_BINS = 64
CROPPED_AZIMUTH_BINS = 48
INPUT_CHIRPS = 40
THRESHOLD_DB = 45.0


class AllZeroChirpWarning(UserWarning):
    """A chirp with no signal at all reached the normalizer."""


def range_azimuth(chirp: np.ndarray, azimuth_bins: int = AZIMUTH_BINS) -> np.ndarray:
    """Complex range-azimuth response of one chirp.

    Args:
        chirp: complex array (n_rx, n_samples).
        azimuth_bins: azimuth FFT length; the rx axis is zero-padded up to it.

    Returns:
        complex64 array (n_samples range bins, azimuth_bins), azimuth axis
        shifted so bin azimuth_bins//2 is boresight. Range bin r maps to
        r * d_res; azimuth bin a maps to sin(theta) = (a - center) * 2 / n_bins.
    """
    if chirp.ndim != 2:
        raise ValueError(f"chirp must be 2-D (n_rx, n_samples), got {chirp.shape}")
    n_rx = chirp.shape[0]
    if n_rx > azimuth_bins:
        raise ValueError(f"azimuth FFT length {azimuth_bins} < n_rx {n_rx}")
    data = np.ascontiguousarray(chirp, dtype=np.complex64)
    range_fft = scipy.fft.fft(data, axis=1)
    azimuth_fft = scipy.fft.fft(range_fft, n=azimuth_bins, axis=0)
    response = np.fft.fftshift(azimuth_fft, axes=0).T
    return np.ascontiguousarray(response, dtype=np.complex64)


def magnitude_threshold_normalize(response: np.ndarray,
                                  threshold_db: float = THRESHOLD_DB) -> np.ndarray:
    """Magnitude of a response, thresholded and scaled into [0, 1].

    Cells more than threshold_db below the peak magnitude become exactly 0;
    the rest are divided by the peak, so the peak cell is exactly 1.0. An
    all-zero response comes back all-zero (no division) with a warning.
    """
    magnitude = np.abs(response).astype(np.float32)
    peak = magnitude.max()
    if peak == 0.0:
        warnings.warn("all-zero response, returning all-zero grid", AllZeroChirpWarning)
        return magnitude
    floor = peak * np.float32(10.0 ** (-threshold_db / 20.0))
    out = magnitude / peak
    out[magnitude < floor] = 0.0
    return out


def crop_fov(grid: np.ndarray, keep: int = CROPPED_AZIMUTH_BINS) -> np.ndarray:
    """Keep the central `keep` azimuth columns of a boresight-centered grid."""
    width = grid.shape[-1]
    if width != AZIMUTH_BINS:
        raise ValueError(f"expected {AZIMUTH_BINS} azimuth bins, got {width}")
    if not 0 < keep <= width:
        raise ValueError(f"cannot keep {keep} of {width} columns")
    start = (width - keep) // 2
    return grid[..., start:start + keep]


def process_chirp(chirp: np.ndarray) -> np.ndarray:
    """One chirp through the full per-chirp pipeline; float32 (64, 48)."""
    return crop_fov(magnitude_threshold_normalize(range_azimuth(chirp)))


def assemble_input(frame: RawFrame, config: RadarConfig,
                   n_input_chirps: int = INPUT_CHIRPS) -> np.ndarray:
    """Model input tensor for one frame: float32 (n_input_chirps, 64, 48).

    Uses exactly the first n_input_chirps chirps; frames with fewer are
    rejected.
    """
    if frame.n_chirps < n_input_chirps:
        raise ValueError(
            f"frame has {frame.n_chirps} chirps, need {n_input_chirps}")
    data = frame.to_complex()[:n_input_chirps]
    if data.shape[2] != config.n_samples or data.shape[1] != config.n_rx:
        raise ValueError(f"frame shape {data.shape} does not match config "
                         f"({config.n_rx} rx, {config.n_samples} samples)")
    slices = [process_chirp(data[i]) for i in range(n_input_chirps)]
    return np.stack(slices).astype(np.float32)


# ---------------------------------------------------------------------------
# Tensor container format: 16-byte header (magic "RCT1", three u16 dims,
# u16 dtype code, 4 reserved bytes), then row-major values, little-endian.
# dtype 0 = float32, dtype 1 = uint8.

TENSOR_MAGIC = b"RCT1"
_TENSOR_HEADER = struct.Struct("<4s3HH4x")
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("u1")}


def write_tensor(path: str | Path, values: np.ndarray) -> None:
    """Write a 3-D float32 or uint8 array (2-D arrays get a leading 1-dim)."""
    if values.ndim == 2:
        values = values[None, ...]
    if values.ndim != 3:
        raise ValueError(f"expected 2-D or 3-D array, got shape {values.shape}")
    if values.dtype == np.float32:
        code = 0
    elif values.dtype == np.uint8:
        code = 1
    else:
        raise ValueError(f"unsupported dtype {values.dtype}")
    if max(values.shape) > 0xFFFF:
        raise ValueError(f"dimension too large for u16 header: {values.shape}")
    header = _TENSOR_HEADER.pack(TENSOR_MAGIC, *values.shape, code)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(values).tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    """Read an array written by write_tensor; returns the stored 3-D shape."""
    with open(path, "rb") as fh:
        header = fh.read(_TENSOR_HEADER.size)
        if len(header) < _TENSOR_HEADER.size:
            raise ValueError(f"{path}: truncated tensor header")
        magic, d0, d1, d2, code = _TENSOR_HEADER.unpack(header)
        if magic != TENSOR_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if code not in _DTYPE_CODES:
            raise ValueError(f"{path}: unknown dtype code {code}")
        dtype = _DTYPE_CODES[code]
        count = d0 * d1 * d2
        data = np.frombuffer(fh.read(count * dtype.itemsize), dtype=dtype)
        if data.size != count:
            raise ValueError(f"{path}: expected {count} values, got {data.size}")
    return data.reshape(d0, d1, d2).copy()
