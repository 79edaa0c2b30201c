"""Geometric primitives shared by the corruption operators.

Covers range computation, RANSAC ground-plane fitting (with least-squares
refinement), beam partitioning (ring passthrough or elevation-quantile
clustering), and fixed/flexible voxelization.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import BeamPartitionError, NoPlaneError
from .profiles import DatasetProfile
from .rng import make_rng
from .types import LabelArray, PointCloud

__all__ = [
    "point_ranges",
    "GroundSource",
    "GroundModel",
    "fit_ground_ransac",
    "ground_mask_from_labels",
    "BeamMethod",
    "BeamPartition",
    "partition_beams",
    "VoxelConfig",
    "voxelize_fixed",
    "voxelize_flexible",
]


def point_ranges(xyz: np.ndarray) -> Union[float, np.ndarray]:
    """Euclidean distance from the sensor origin, per point.

    Accepts a single (3,) point (returns a float) or an (N, 3) array
    (returns an (N,) float64 array).
    """
    arr = np.asarray(xyz, dtype=np.float64)
    if arr.ndim == 1:
        return float(np.linalg.norm(arr))
    return np.linalg.norm(arr, axis=1)


class GroundSource(str, enum.Enum):
    SEMANTIC_LABELS = "semantic_labels"
    RANSAC = "ransac"


@dataclass(frozen=True)
class GroundModel:
    """Ground plane a*x + b*y + c*z + d = 0 with unit normal (a, b, c)."""

    plane: tuple[float, float, float, float]
    inlier_mask: np.ndarray
    source: GroundSource

    @property
    def normal(self) -> np.ndarray:
        return np.asarray(self.plane[:3], dtype=np.float64)

    def distances(self, xyz: np.ndarray) -> np.ndarray:
        """Unsigned point-to-plane distances."""
        pts = np.asarray(xyz, dtype=np.float64)
        return np.abs(pts @ self.normal + self.plane[3])


def fit_ground_ransac(
    pc: PointCloud,
    iterations: int = 200,
    inlier_threshold: float = 0.15,
    seed: int = 0,
) -> GroundModel:
    """Fit the dominant plane by RANSAC over sampled point triples.

    The best-supported sample is refined by a least-squares fit on its
    inliers; the refit is kept only if it does not lose support. The normal
    is oriented upward (c >= 0) and the returned inlier mask is consistent
    with the final plane.

    Raises:
        NoPlaneError: fewer than 3 points, or every sampled triple collinear.
    """
    pts = pc.xyz.astype(np.float64)
    n = len(pts)
    if n < 3:
        raise NoPlaneError(f"need at least 3 points to fit a plane, got {n}")
    rng = make_rng("ransac", seed)

    best_normal: Optional[np.ndarray] = None
    best_d = 0.0
    best_count = -1
    for _ in range(iterations):
        idx = rng.choice(n, size=3, replace=False)
        p0, p1, p2 = pts[idx]
        normal = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = normal / norm
        d = -float(normal @ p0)
        count = int((np.abs(pts @ normal + d) <= inlier_threshold).sum())
        if count > best_count:
            best_normal, best_d, best_count = normal, d, count
    if best_normal is None:
        raise NoPlaneError("all sampled triples were degenerate (collinear points)")

    mask = np.abs(pts @ best_normal + best_d) <= inlier_threshold
    if mask.sum() >= 3:
        centroid = pts[mask].mean(axis=0)
        _, _, vt = np.linalg.svd(pts[mask] - centroid, full_matrices=False)
        refit_normal = vt[-1]
        refit_d = -float(refit_normal @ centroid)
        refit_mask = np.abs(pts @ refit_normal + refit_d) <= inlier_threshold
        if refit_mask.sum() >= best_count:
            best_normal, best_d, mask = refit_normal, refit_d, refit_mask

    if best_normal[2] < 0:
        best_normal, best_d = -best_normal, -best_d
    a, b, c = (float(v) for v in best_normal)
    return GroundModel(
        plane=(a, b, c, float(best_d)),
        inlier_mask=mask,
        source=GroundSource.RANSAC,
    )


def ground_mask_from_labels(labels: LabelArray, profile: DatasetProfile) -> np.ndarray:
    """True where the semantic label belongs to the profile's ground classes."""
    return np.isin(labels.semantic, np.array(sorted(profile.ground_classes), dtype=np.int64))


class BeamMethod(str, enum.Enum):
    RING_CHANNEL = "ring_channel"
    ELEVATION_QUANTIZATION = "elevation_quantization"


@dataclass(frozen=True)
class BeamPartition:
    """Per-point beam assignment; beam 0 is the highest-elevation beam."""

    beam_of: np.ndarray
    beam_count: int
    method: BeamMethod


def partition_beams(
    pc: PointCloud, profile: Union[DatasetProfile, int, None] = None
) -> BeamPartition:
    """Assign every point to a beam.

    Uses the ring channel verbatim when present. Otherwise points are bucketed
    into `beam_count` equal-count bins of elevation angle asin(z / range),
    with beam ids ordered by descending elevation.

    Raises:
        BeamPartitionError: no ring channel and no beam count available.
    """
    beam_count: Optional[int]
    if isinstance(profile, DatasetProfile):
        beam_count = profile.beam_count
    else:
        beam_count = profile

    if pc.ring is not None:
        count = beam_count if beam_count is not None else (
            int(pc.ring.max()) + 1 if len(pc) else 0
        )
        return BeamPartition(
            beam_of=pc.ring.astype(np.int64),
            beam_count=count,
            method=BeamMethod.RING_CHANNEL,
        )
    if beam_count is None:
        raise BeamPartitionError("no ring channel and no beam count given")
    if len(pc) == 0:
        return BeamPartition(
            beam_of=np.zeros(0, dtype=np.int64),
            beam_count=beam_count,
            method=BeamMethod.ELEVATION_QUANTIZATION,
        )

    xyz = pc.xyz.astype(np.float64)
    ranges = np.linalg.norm(xyz, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sin_elev = np.where(ranges > 0, xyz[:, 2] / np.maximum(ranges, 1e-300), 0.0)
    elevation = np.arcsin(np.clip(sin_elev, -1.0, 1.0))

    quantiles = np.arange(1, beam_count) / beam_count
    boundaries = np.quantile(elevation, quantiles)
    bins = np.searchsorted(boundaries, elevation, side="right")
    beam_of = (beam_count - 1 - bins).astype(np.int64)
    return BeamPartition(
        beam_of=beam_of,
        beam_count=beam_count,
        method=BeamMethod.ELEVATION_QUANTIZATION,
    )


@dataclass(frozen=True)
class VoxelConfig:
    """Voxel sizes per axis (meters) and jitter half-width gamma.

    gamma must satisfy 0 <= gamma < min(l) / 2 so jittered sizes stay
    positive.
    """

    l: tuple[float, float, float]
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if min(self.l) <= 0:
            raise ValueError(f"voxel sizes must be positive, got {self.l}")
        if not 0 <= self.gamma < min(self.l) / 2:
            raise ValueError(
                f"gamma must be in [0, min(l)/2) = [0, {min(self.l) / 2}), got {self.gamma}"
            )


def _floor_coords(xyz: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    pts = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    return np.floor(pts / sizes).astype(np.int64)


def voxelize_fixed(pc: Union[PointCloud, np.ndarray], cfg: VoxelConfig) -> np.ndarray:
    """Integer voxel coordinates floor(p / l), component-wise."""
    xyz = pc.xyz if isinstance(pc, PointCloud) else pc
    return _floor_coords(xyz, np.asarray(cfg.l, dtype=np.float64))


def voxelize_flexible(
    pc: Union[PointCloud, np.ndarray], cfg: VoxelConfig, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Voxelize with per-call jittered sizes l + dv, dv ~ U(-gamma, gamma)^3.

    One offset triple is drawn per call (per frame, not per point), so all
    points of a frame share a single voxel grid. Returns (coords, sizes).
    With gamma = 0 the output is identical to `voxelize_fixed`.
    """
    rng = make_rng("flexible-voxel", seed)
    dv = rng.uniform(-cfg.gamma, cfg.gamma, size=3)
    sizes = np.asarray(cfg.l, dtype=np.float64) + dv
    xyz = pc.xyz if isinstance(pc, PointCloud) else pc
    return _floor_coords(xyz, sizes), sizes
