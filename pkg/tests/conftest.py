"""Shared synthetic-scan builders for the test suite."""

import numpy as np
import pytest

from lidarcorrupt import LabelArray, PointCloud
from lidarcorrupt.corruptions import CorruptedFrame


def make_beam_cloud(
    beams: int = 64,
    points_per_beam: int = 10,
    seed: int = 0,
    with_ring: bool = True,
    frame_id: str = "000000",
):
    """Synthetic multi-beam scan; beam 0 has the highest elevation.

    Returns (cloud, true_beam) where true_beam records the generating beam
    of every point.
    """
    rng = np.random.default_rng(seed)
    elevations = np.deg2rad(np.linspace(3.0, -25.0, beams))
    xyz = []
    true_beam = []
    for beam, elev in enumerate(elevations):
        azimuth = rng.uniform(0.0, 2.0 * np.pi, points_per_beam)
        dist = rng.uniform(5.0, 40.0, points_per_beam)
        jitter = rng.uniform(-1e-4, 1e-4, points_per_beam)
        e = elev + jitter
        xyz.append(
            np.stack(
                [
                    dist * np.cos(e) * np.cos(azimuth),
                    dist * np.cos(e) * np.sin(azimuth),
                    dist * np.sin(e),
                ],
                axis=1,
            )
        )
        true_beam.extend([beam] * points_per_beam)
    xyz = np.concatenate(xyz).astype(np.float32)
    true_beam = np.asarray(true_beam, dtype=np.int64)
    n = len(xyz)
    cloud = PointCloud(
        xyz=xyz,
        intensity=rng.uniform(0.05, 1.0, n).astype(np.float32),
        ring=true_beam.astype(np.int32) if with_ring else None,
        frame_id=frame_id,
    )
    return cloud, true_beam


def make_labeled_frame(
    beams: int = 64,
    points_per_beam: int = 10,
    seed: int = 0,
    semantic: int = 40,
    with_ring: bool = True,
) -> CorruptedFrame:
    cloud, _ = make_beam_cloud(beams, points_per_beam, seed, with_ring)
    labels = LabelArray(
        semantic=np.full(len(cloud), semantic, dtype=np.uint16),
        instance=np.zeros(len(cloud), dtype=np.uint16),
    )
    return CorruptedFrame.clean(cloud, labels)


@pytest.fixture
def beam_cloud_64x10():
    return make_beam_cloud(64, 10, seed=3)


@pytest.fixture
def labeled_frame():
    return make_labeled_frame(seed=5)
