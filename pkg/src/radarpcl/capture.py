"""Capture-card style packet protocol: packetize, stream, reassemble, record.

Packets carry a 10-byte header (little-endian u32 sequence number plus a
48-bit cumulative payload byte count) and at most 1452 payload bytes, so
header + payload never exceeds the 1462-byte ceiling of the emulated
capture hardware. Packets may be lost but never reordered; the reassembler
zero-fills holes so the frame cadence survives losses.
"""

from __future__ import annotations

import queue
import socket
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from .config import BYTES_PER_SAMPLE, RadarConfig
from .simulate import RawFrame

HEADER_BYTES = 10
MAX_PACKET_BYTES = 1462
MAX_PAYLOAD = MAX_PACKET_BYTES - HEADER_BYTES
_SEQ = struct.Struct("<I")


class ProtocolError(RuntimeError):
    """Sequence regression or inconsistent packet headers; stream must reset."""


@dataclass(frozen=True)
class CapturePacket:
    """One wire packet: sequence number, cumulative byte offset, payload."""

    seq: int
    byte_offset: int
    payload: bytes

    def __post_init__(self):
        if not 0 <= self.seq < 2 ** 32:
            raise ValueError(f"seq {self.seq} out of u32 range")
        if not 0 <= self.byte_offset < 2 ** 48:
            raise ValueError(f"byte_offset {self.byte_offset} out of u48 range")
        if not 1 <= len(self.payload) <= MAX_PAYLOAD:
            raise ValueError(f"payload length {len(self.payload)} not in [1, {MAX_PAYLOAD}]")

    def to_bytes(self) -> bytes:
        return (_SEQ.pack(self.seq)
                + self.byte_offset.to_bytes(6, "little")
                + self.payload)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CapturePacket":
        if len(data) < HEADER_BYTES + 1:
            raise ProtocolError(f"packet too short: {len(data)} bytes")
        if len(data) > MAX_PACKET_BYTES:
            raise ProtocolError(f"packet too long: {len(data)} bytes")
        seq = _SEQ.unpack_from(data)[0]
        byte_offset = int.from_bytes(data[4:10], "little")
        return cls(seq, byte_offset, bytes(data[10:]))


def packetize(frame_bytes: bytes, max_payload: int = MAX_PAYLOAD,
              start_seq: int = 0, start_offset: int = 0) -> list[CapturePacket]:
    """Split a frame's bytes into sequenced packets.

    Payloads concatenate back to the input; seq numbers are contiguous from
    start_seq and byte_offset holds the cumulative payload count before each
    packet (start_offset for the first).
    """
    if len(frame_bytes) == 0:
        raise ValueError("cannot packetize empty input")
    if not 1 <= max_payload <= MAX_PAYLOAD:
        raise ValueError(f"max_payload must be in [1, {MAX_PAYLOAD}]")
    packets = []
    for i, pos in enumerate(range(0, len(frame_bytes), max_payload)):
        packets.append(CapturePacket(
            seq=start_seq + i,
            byte_offset=start_offset + pos,
            payload=bytes(frame_bytes[pos:pos + max_payload])))
    return packets


class Packetizer:
    """Stateful packetizer that keeps seq/byte offsets across frames."""

    def __init__(self, max_payload: int = MAX_PAYLOAD):
        self.max_payload = max_payload
        self.next_seq = 0
        self.byte_offset = 0

    def packetize(self, frame_bytes: bytes) -> list[CapturePacket]:
        packets = packetize(frame_bytes, self.max_payload,
                            start_seq=self.next_seq, start_offset=self.byte_offset)
        self.next_seq += len(packets)
        self.byte_offset += len(frame_bytes)
        return packets


@dataclass
class StreamStats:
    """Running counters for one capture stream."""

    packets_seen: int = 0
    packets_lost: int = 0
    frames_completed: int = 0
    frames_with_gaps: int = 0
    achieved_bit_rate: float = 0.0


@dataclass(frozen=True)
class AssembledFrame:
    """Reassembled frame payload; has_gap marks zero-filled holes."""

    index: int
    data: bytes
    has_gap: bool


class FrameAssembler:
    """Rebuild fixed-size frames from an in-order (but lossy) packet stream.

    Lost packets are detected from seq/byte_offset jumps; the missing byte
    range is zero-filled and every frame it touches is flagged. Sequence
    regressions raise ProtocolError.
    """

    def __init__(self, expected_frame_bytes: int):
        if expected_frame_bytes <= 0:
            raise ValueError("expected_frame_bytes must be positive")
        self.expected_frame_bytes = expected_frame_bytes
        self.stats = StreamStats()
        self._buffer = bytearray()
        self._next_seq = 0
        self._offset = 0            # payload bytes accounted for so far
        self._emitted = 0
        self._gap_frames: set[int] = set()
        self._first_packet_time: float | None = None
        self._payload_bits = 0

    def feed(self, packet: CapturePacket) -> list[AssembledFrame]:
        """Consume one packet; return any frames it completed."""
        if packet.seq < self._next_seq:
            raise ProtocolError(
                f"seq regression: got {packet.seq}, expected >= {self._next_seq}")
        if packet.byte_offset < self._offset:
            raise ProtocolError(
                f"byte_offset regression: got {packet.byte_offset}, have {self._offset}")
        if packet.seq == self._next_seq and packet.byte_offset != self._offset:
            raise ProtocolError(
                f"offset mismatch for seq {packet.seq}: "
                f"{packet.byte_offset} != {self._offset}")
        if packet.seq > self._next_seq:
            self._zero_fill(packet.byte_offset - self._offset)
        self._buffer.extend(packet.payload)
        self._offset = packet.byte_offset + len(packet.payload)
        self._next_seq = packet.seq + 1

        now = time.monotonic()
        if self._first_packet_time is None:
            self._first_packet_time = now
        self._payload_bits += len(packet.payload) * 8
        elapsed = now - self._first_packet_time
        if elapsed > 0:
            self.stats.achieved_bit_rate = self._payload_bits / elapsed
        self.stats.packets_seen += 1
        self.stats.packets_lost = self._next_seq - self.stats.packets_seen
        return self._drain()

    def flush(self) -> AssembledFrame | None:
        """Zero-pad and emit a trailing partial frame, if any."""
        if not self._buffer:
            return None
        missing = self.expected_frame_bytes - len(self._buffer)
        self._zero_fill(missing)
        frames = self._drain()
        return frames[0] if frames else None

    def _zero_fill(self, n_bytes: int) -> None:
        if n_bytes <= 0:
            return
        start = self._emitted * self.expected_frame_bytes + len(self._buffer)
        first = start // self.expected_frame_bytes
        last = (start + n_bytes - 1) // self.expected_frame_bytes
        self._gap_frames.update(range(first, last + 1))
        self._buffer.extend(b"\x00" * n_bytes)

    def _drain(self) -> list[AssembledFrame]:
        frames = []
        size = self.expected_frame_bytes
        while len(self._buffer) >= size:
            data = bytes(self._buffer[:size])
            del self._buffer[:size]
            index = self._emitted
            has_gap = index in self._gap_frames
            self._gap_frames.discard(index)
            frames.append(AssembledFrame(index, data, has_gap))
            self._emitted += 1
            self.stats.frames_completed += 1
            if has_gap:
                self.stats.frames_with_gaps += 1
        return frames


class LossInjector:
    """Seeded Bernoulli packet dropper.

    Draws one uniform variate per offered packet, dropping when it falls
    below the loss rate, so for a fixed seed a higher rate drops a superset
    of packets.
    """

    def __init__(self, rate: float, seed: int = 0):
        if not 0.0 <= rate < 1.0:
            raise ValueError("loss rate must be in [0, 1)")
        self.rate = rate
        self.dropped = 0
        self._rng = np.random.default_rng(seed)

    def keep(self, packet: CapturePacket) -> bool:
        if self._rng.random() < self.rate:
            self.dropped += 1
            return False
        return True


class PacketQueue:
    """Bounded producer/consumer channel that drops (and counts) on overflow."""

    _CLOSE = object()

    def __init__(self, maxsize: int = 256):
        self._q: queue.Queue = queue.Queue(maxsize)
        self.dropped = 0

    def put(self, packet: CapturePacket) -> bool:
        try:
            self._q.put_nowait(packet)
            return True
        except queue.Full:
            self.dropped += 1
            return False

    def close(self) -> None:
        self._q.put(self._CLOSE)  # blocking: the close marker must arrive

    def get(self, timeout: float | None = None):
        """Next packet, or None once the queue is closed."""
        item = self._q.get(timeout=timeout)
        if item is self._CLOSE:
            return None
        return item


class UdpSender:
    """Datagram transport; packet bytes are identical to the in-process path."""

    def __init__(self, host: str, port: int):
        self._addr = (host, port)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, packet: CapturePacket) -> None:
        self._sock.sendto(packet.to_bytes(), self._addr)

    def close(self) -> None:
        self._sock.close()


class UdpReceiver:
    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((host, port))
        self.port = self._sock.getsockname()[1]

    def recv(self, timeout: float | None = None) -> CapturePacket | None:
        self._sock.settimeout(timeout)
        try:
            data, _ = self._sock.recvfrom(MAX_PACKET_BYTES)
        except socket.timeout:
            return None
        return CapturePacket.from_bytes(data)

    def close(self) -> None:
        self._sock.close()


# ---------------------------------------------------------------------------
# Raw-capture file format: 32-byte header {magic "RDC1", version u16,
# n_chirps u16, n_rx u16, n_samples u16, f_samp u64 (Sa/s), chirp_slope u64
# (Hz/ms), 4 reserved bytes}, then frames back-to-back. All little-endian;
# sample layout inside a frame is I,Q interleaved, sample fastest, then rx,
# then chirp.

CAPTURE_MAGIC = b"RDC1"
CAPTURE_VERSION = 1
_CAPTURE_HEADER = struct.Struct("<4sHHHHQQ4x")


def _capture_header(config: RadarConfig) -> bytes:
    return _CAPTURE_HEADER.pack(
        CAPTURE_MAGIC, CAPTURE_VERSION, config.n_chirps, config.n_rx,
        config.n_samples, round(config.sample_rate),
        round(config.chirp_slope / 1e3))


class CaptureWriter:
    """Incrementally write raw frames to a capture file."""

    def __init__(self, path: str | Path, config: RadarConfig):
        self.config = config
        self._fh = open(path, "wb")
        self._fh.write(_capture_header(config))
        self.frames_written = 0

    def write(self, frame: RawFrame) -> None:
        data = frame.tobytes()
        if len(data) != self.config.frame_bytes:
            raise ValueError(f"frame is {len(data)} bytes, expected "
                             f"{self.config.frame_bytes}")
        self._fh.write(data)
        self.frames_written += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_capture(path: str | Path, config: RadarConfig,
                  frames: Iterable[RawFrame]) -> int:
    with CaptureWriter(path, config) as writer:
        for frame in frames:
            writer.write(frame)
        return writer.frames_written


@dataclass
class CaptureHeader:
    n_chirps: int
    n_rx: int
    n_samples: int
    sample_rate: float
    chirp_slope: float

    @property
    def frame_bytes(self) -> int:
        return self.n_chirps * self.n_rx * self.n_samples * BYTES_PER_SAMPLE

    def matches(self, config: RadarConfig) -> bool:
        return (self.n_chirps == config.n_chirps and self.n_rx == config.n_rx
                and self.n_samples == config.n_samples
                and self.sample_rate == round(config.sample_rate)
                and self.chirp_slope == round(config.chirp_slope / 1e3) * 1e3)


class CaptureReader:
    """Read frames (as bytes or RawFrame) from a capture file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(path, "rb")
        raw = self._fh.read(_CAPTURE_HEADER.size)
        if len(raw) < _CAPTURE_HEADER.size:
            raise ValueError(f"{path}: truncated capture header")
        magic, version, n_chirps, n_rx, n_samples, f_samp, slope = \
            _CAPTURE_HEADER.unpack(raw)
        if magic != CAPTURE_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != CAPTURE_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        self.header = CaptureHeader(n_chirps, n_rx, n_samples,
                                    float(f_samp), slope * 1e3)

    @property
    def n_frames(self) -> int:
        size = self.path.stat().st_size - _CAPTURE_HEADER.size
        return size // self.header.frame_bytes

    def iter_frame_bytes(self) -> Iterator[bytes]:
        while True:
            data = self._fh.read(self.header.frame_bytes)
            if len(data) < self.header.frame_bytes:
                return
            yield data

    def iter_frames(self, config: RadarConfig | None = None) -> Iterator[RawFrame]:
        shape = (self.header.n_chirps, self.header.n_rx, self.header.n_samples, 2)
        if config is not None and not self.header.matches(config):
            raise ValueError(f"{self.path}: header does not match config")
        for index, data in enumerate(self.iter_frame_bytes()):
            samples = np.frombuffer(data, dtype="<i2").reshape(shape).copy()
            yield RawFrame(samples, frame_index=index)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class ReplayReport:
    frames_sent: int
    packets_sent: int
    elapsed_s: float
    achieved_bit_rate: float  # payload bits per second
    mean_frame_period_s: float


def stream_replay(path: str | Path, pace_fps: float,
                  sink: Callable[[CapturePacket], object],
                  max_payload: int = MAX_PAYLOAD,
                  loss: LossInjector | None = None,
                  max_frames: int | None = None) -> ReplayReport:
    """Replay a capture file through `sink` at a fixed frame pace.

    All packets of a frame are emitted together, frames 1/pace_fps apart on
    the monotonic clock. An optional LossInjector models a lossy link.
    """
    if pace_fps <= 0:
        raise ValueError(f"pace must be positive, got {pace_fps}")
    period = 1.0 / pace_fps
    packetizer = Packetizer(max_payload)
    frames_sent = packets_sent = 0
    payload_bits = 0
    with CaptureReader(path) as reader:
        start = time.monotonic()
        for i, frame_bytes in enumerate(reader.iter_frame_bytes()):
            if max_frames is not None and i >= max_frames:
                break
            deadline = start + i * period
            delay = deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            for packet in packetizer.packetize(frame_bytes):
                if loss is not None and not loss.keep(packet):
                    continue
                sink(packet)
                packets_sent += 1
                payload_bits += len(packet.payload) * 8
            frames_sent += 1
        elapsed = time.monotonic() - start
    return ReplayReport(
        frames_sent=frames_sent,
        packets_sent=packets_sent,
        elapsed_s=elapsed,
        achieved_bit_rate=payload_bits / elapsed if elapsed > 0 else 0.0,
        mean_frame_period_s=elapsed / frames_sent if frames_sent else 0.0)
