"""Point-set file formats: CSV for humans, raw little-endian f64 for bulk.

Binary layout: 16-byte header (magic "KPSD", u32 version, u32 n, u32 d)
followed by n*d float64 values, row-major, little-endian.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"KPSD"
VERSION = 1


def write_points_csv(path, points: np.ndarray):
    np.savetxt(path, np.asarray(points, dtype=np.float64), delimiter=",", fmt="%.17g")


def read_points_csv(path) -> np.ndarray:
    pts = np.loadtxt(path, delimiter=",", dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts


def write_points_bin(path, points: np.ndarray):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n, d = pts.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", MAGIC, VERSION, n, d))
        fh.write(pts.astype("<f8").tobytes())


def read_points_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        magic, version, n, d = struct.unpack("<4sIII", head)
        if magic != MAGIC or version != VERSION:
            raise ValueError(f"not a point file: {path}")
        data = np.frombuffer(fh.read(n * d * 8), dtype="<f8")
    return data.reshape(n, d).copy()


def write_points(path, points: np.ndarray):
    if str(path).endswith(".csv"):
        write_points_csv(path, points)
    else:
        write_points_bin(path, points)


def read_points(path) -> np.ndarray:
    if str(path).endswith(".csv"):
        return read_points_csv(path)
    return read_points_bin(path)
