"""Probabilistic density volumes and their orthographic grayscale projections.

The packing volume is discretized into a user-defined voxel grid; each
voxel's value is the fraction of its volume covered by instances, estimated
with a regular sub-sample lattice.  Averaging the volumes of a run's seeds
yields the run's probabilistic volume.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import PackingOutput
from .recipe import PackingVolume, VolumeMode

# Sub-sample lattice resolution per voxel axis (s^3 points per voxel).
SUBSAMPLE = 4


class ShapeMismatch(ValueError):
    """Volumes to average have different dims or voxel sizes."""


@dataclass
class DensityVolume:
    dims: tuple[int, int, int]
    voxel_size: tuple[float, float, float]
    values: np.ndarray  # (nx, ny, nz) combined occupied fraction in [0, 1]
    channels: dict[str, np.ndarray]  # per-ingredient fractions
    n_outputs_averaged: int = 1


@dataclass
class ProjectionImage:
    axis: str  # "x", "y" or "z"
    raw: np.ndarray  # pre-normalization mean fractions
    pixels: np.ndarray  # gray values in [0, 1], normalized to the image max
    norm_max: float


_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def _subsample_points(dims, voxel_size, s: int) -> np.ndarray:
    """Global (M, 3) array of sub-sample points, voxel-major order."""
    axes = []
    for d, vs in zip(dims, voxel_size):
        centers = (np.arange(d) + 0.5) * vs
        offsets = ((np.arange(s) + 0.5) / s - 0.5) * vs
        axes.append((centers[:, None] + offsets[None, :]).ravel())
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


def _image_offsets(volume: PackingVolume, position, radius: float) -> list[np.ndarray]:
    """Periodic image shifts whose sphere could reach into the base box."""
    offsets = [np.zeros(3)]
    if not volume.periodic:
        return offsets
    naxes = 2 if volume.mode is VolumeMode.PLANE2D else 3
    per_axis = []
    for a in range(3):
        shifts = [0.0]
        if a < naxes:
            ext = volume.extents[a]
            if position[a] - radius < 0:
                shifts.append(ext)
            if position[a] + radius > ext:
                shifts.append(-ext)
        per_axis.append(shifts)
    out = []
    for sx in per_axis[0]:
        for sy in per_axis[1]:
            for sz in per_axis[2]:
                out.append(np.array([sx, sy, sz]))
    return out


def voxelize(
    out: PackingOutput,
    volume: PackingVolume,
    dims: tuple[int, int, int],
    subsample: int = SUBSAMPLE,
) -> DensityVolume:
    """Covered-fraction voxel grid of one output.

    Periodic volumes also test each instance's boundary images, so mass
    protruding past one face reappears on the opposite face.
    """
    if volume.mode is VolumeMode.SPHERE_SURFACE:
        raise ValueError("volumetric heatmaps are not defined for sphere_surface recipes")
    if volume.mode is VolumeMode.PLANE2D:
        dims = (dims[0], dims[1], 1)
        extz = 1.0  # dummy thickness; circles live at z = 0 and cover the slab fully in z
        voxel_size = (volume.extents[0] / dims[0], volume.extents[1] / dims[1], extz)
    else:
        voxel_size = tuple(e / d for e, d in zip(volume.extents, dims))
    if any(d < 1 for d in dims):
        raise ValueError("dims must be >= 1 per axis")

    s = subsample
    pts = _subsample_points(dims, voxel_size, s)
    planar = volume.mode is VolumeMode.PLANE2D
    if planar:
        pts = pts.copy()
        pts[:, 2] = 0.0  # coverage is evaluated in the plane

    names = sorted(out.requested_counts)
    inside_any = np.zeros(len(pts), dtype=bool)
    inside_per = {n: np.zeros(len(pts), dtype=bool) for n in names}
    for inst in out.instances:
        base = np.array(inst.position)
        r2 = inst.radius**2
        for off in _image_offsets(volume, inst.position, inst.radius):
            center = base + off
            if planar:
                center = center.copy()
                center[2] = 0.0
            d2 = np.einsum("ij,ij->i", pts - center, pts - center)
            hit = d2 <= r2
            inside_any |= hit
            inside_per[inst.ingredient] |= hit

    # sub-points are interleaved per axis: flat index order is
    # (voxel_x, sub_x, voxel_y, sub_y, voxel_z, sub_z)
    shape = (dims[0], s, dims[1], s, dims[2], s)

    def fractions(mask: np.ndarray) -> np.ndarray:
        return mask.reshape(shape).mean(axis=(1, 3, 5))

    return DensityVolume(
        dims=tuple(dims),
        voxel_size=tuple(float(v) for v in voxel_size),
        values=fractions(inside_any),
        channels={n: fractions(inside_per[n]) for n in names},
        n_outputs_averaged=1,
    )


def average_volumes(vols: list[DensityVolume]) -> DensityVolume:
    """Per-voxel arithmetic mean: the run's probabilistic volume."""
    if not vols:
        raise ShapeMismatch("no volumes to average")
    first = vols[0]
    for v in vols[1:]:
        if v.dims != first.dims or v.voxel_size != first.voxel_size:
            raise ShapeMismatch("volumes differ in dims or voxel_size")
        if set(v.channels) != set(first.channels):
            raise ShapeMismatch("volumes differ in ingredient channels")
    values = np.mean([v.values for v in vols], axis=0)
    channels = {
        n: np.mean([v.channels[n] for v in vols], axis=0) for n in first.channels
    }
    return DensityVolume(
        dims=first.dims,
        voxel_size=first.voxel_size,
        values=values,
        channels=channels,
        n_outputs_averaged=sum(v.n_outputs_averaged for v in vols),
    )


def project(vol: DensityVolume, axis: str, channel: Optional[str] = None) -> ProjectionImage:
    """Mean-along-axis orthographic projection with per-image normalization.

    The mean (rather than max) preserves the occupancy interpretation: the
    pre-normalization pixel mean equals the volume mean exactly.
    """
    if axis not in _AXIS_INDEX:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    data = vol.values if channel is None else vol.channels[channel]
    raw = data.mean(axis=_AXIS_INDEX[axis])
    peak = float(raw.max()) if raw.size else 0.0
    pixels = raw / peak if peak > 0 else np.zeros_like(raw)
    return ProjectionImage(axis=axis, raw=raw, pixels=pixels, norm_max=peak)


def surface_density_map(
    out: PackingOutput, volume: PackingVolume, bins: tuple[int, int] = (16, 32)
) -> np.ndarray:
    """Equal-area longitude-latitude density map for sphere_surface recipes.

    Bins are uniform in z = cos(theta) (equal area) by uniform in longitude;
    each instance adds its cap area to its center's bin.  Values are covered
    fraction per bin, clipped to [0, 1].
    """
    if volume.mode is not VolumeMode.SPHERE_SURFACE:
        raise ValueError("surface density maps require a sphere_surface volume")
    nz, nphi = bins
    counts = np.zeros((nz, nphi))
    radius = volume.radius
    for inst in out.instances:
        p = np.array(inst.position)
        z = np.clip(p[2] / radius, -1.0, 1.0)
        phi = math.atan2(p[1], p[0]) % (2.0 * math.pi)
        iz = min(int((z + 1.0) / 2.0 * nz), nz - 1)
        ip = min(int(phi / (2.0 * math.pi) * nphi), nphi - 1)
        counts[iz, ip] += math.pi * inst.radius**2
    bin_area = 4.0 * math.pi * radius**2 / (nz * nphi)
    return np.clip(counts / bin_area, 0.0, 1.0)


# --- serialization ---


def write_pgm(img: ProjectionImage) -> bytes:
    """8-bit grayscale PGM (P5), row-major with the first axis as rows."""
    gray = np.clip(np.rint(img.pixels * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{gray.shape[1]} {gray.shape[0]}\n255\n".encode()
    return header + gray.tobytes()


def projection_sidecar(img: ProjectionImage) -> dict:
    return {
        "axis": img.axis,
        "dims": list(img.pixels.shape),
        "normalization_max": img.norm_max,
    }


def write_volume(vol: DensityVolume) -> tuple[dict, bytes]:
    """JSON header plus flat little-endian float32 payload (combined channel)."""
    header = {
        "dims": list(vol.dims),
        "voxel_size": list(vol.voxel_size),
        "n_outputs_averaged": vol.n_outputs_averaged,
        "dtype": "<f4",
        "order": "C",
        "channels": sorted(vol.channels),
    }
    payload = vol.values.astype("<f4").tobytes(order="C")
    return header, payload
