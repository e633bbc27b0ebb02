"""On-disk formats: binary sonar frames and portable graymaps.

Frame file layout (little-endian)::

    offset  size  field
    0       4     magic b"SNRF"
    4       2     version (1)
    6       2     device (0 = FLS, 1 = MSIS)
    8       4     n_beams
    12      4     n_bins
    16      8     fov_azimuth   (float64, radians)
    24      8     fov_elevation (float64, radians)
    32      8     range_min     (float64, meters)
    40      8     range_max     (float64, meters)
    48      8     frequency     (float64, kHz)
    56      8     timestamp     (float64, seconds)
    64      4*n   intensities, float32, row-major [beam][bin]

An optional trailer of ``n_beams`` float64 beam bearings (radians) follows
the intensities.  Readers that stop after the intensities stay compatible;
without the trailer bearings are assumed evenly spaced across the fov.
"""

from __future__ import annotations

import struct

import numpy as np

from .sonogram import AcousticImage, SonarFrame

MAGIC = b"SNRF"
VERSION = 1
_HEADER = struct.Struct("<4sHHII6d")
_DEVICES = {"FLS": 0, "MSIS": 1}


class FrameFormatError(ValueError):
    pass


def frame_to_bytes(frame: SonarFrame) -> bytes:
    head = _HEADER.pack(
        MAGIC, VERSION, _DEVICES[frame.device], frame.n_beams, frame.n_bins,
        frame.fov_azimuth, frame.fov_elevation, frame.range_min, frame.range_max,
        frame.frequency, frame.timestamp,
    )
    body = np.ascontiguousarray(frame.intensities, dtype="<f4").tobytes()
    tail = np.ascontiguousarray(frame.bearings, dtype="<f8").tobytes()
    return head + body + tail


def frame_from_bytes(data: bytes) -> SonarFrame:
    if len(data) < _HEADER.size:
        raise FrameFormatError("truncated frame header")
    magic, version, device, n_beams, n_bins, fov_az, fov_el, rmin, rmax, freq, ts = \
        _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FrameFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FrameFormatError(f"unsupported version {version}")
    n = n_beams * n_bins
    end = _HEADER.size + 4 * n
    if len(data) < end:
        raise FrameFormatError("truncated intensity block")
    vals = np.frombuffer(data, dtype="<f4", count=n, offset=_HEADER.size)
    vals = vals.astype(np.float64).reshape(n_beams, n_bins)
    if len(data) >= end + 8 * n_beams:
        bearings = np.frombuffer(data, dtype="<f8", count=n_beams, offset=end).copy()
    else:
        step = fov_az / n_beams
        bearings = -fov_az / 2 + step * (np.arange(n_beams) + 0.5)
    names = {v: k for k, v in _DEVICES.items()}
    return SonarFrame(vals, bearings, rmin, rmax, names.get(device, "FLS"),
                      fov_az, fov_el, freq, ts)


def write_frame(frame: SonarFrame, path) -> None:
    with open(path, "wb") as fh:
        fh.write(frame_to_bytes(frame))


def read_frame(path) -> SonarFrame:
    with open(path, "rb") as fh:
        return frame_from_bytes(fh.read())


def write_pgm(pixels: np.ndarray, path, bits: int = 8, comment: str | None = None) -> None:
    """Binary PGM (P5) from values in [0, 1]; ``bits`` is 8 or 16."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    maxval = 255 if bits == 8 else 65535
    img = np.rint(np.clip(pixels, 0.0, 1.0) * maxval)
    img = img.astype(np.uint8 if bits == 8 else ">u2")
    h, w = img.shape
    head = "P5\n"
    if comment:
        head += "".join(f"# {line}\n" for line in comment.splitlines())
    with open(path, "wb") as fh:
        fh.write(f"{head}{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = np.uint8 if maxval < 256 else ">u2"
    img = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos + 1).reshape(h, w)
    return img.astype(np.float64) / maxval


def write_image(image: AcousticImage, path, bits: int = 8) -> None:
    write_pgm(image.pixels, path, bits)
