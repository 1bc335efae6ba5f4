"""
Feature sharing between point clouds, camera frames and the top-down grid.

    pool:   points -> cells, sum of the features binned into each cell
    unpool: cells -> points, each point gets (adds) its cell's vector
    image:  depth + pose unprojection of frames, then pool

pool and unpool are adjoint linear maps. Summation runs in point-index
order, so results are bit-reproducible.
"""
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from config import config, log
from domain import FloorplanDomain
from pointcloud import PointCloud


class FrameFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    data: np.ndarray        # (H, W, C)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"feature grid must be (H, W, C), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature grid values must be finite")
        object.__setattr__(self, 'data', arr)

    @property
    def resolution(self) -> tuple:
        return self.data.shape[0], self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class CameraFrame:
    intrinsics: tuple       # (fx, fy, cx, cy)
    pose: np.ndarray        # 4x4 world-from-camera
    depth: np.ndarray       # (H, W) meters, 0 = invalid
    features: np.ndarray    # (H, W, C)

    def __post_init__(self):
        fx, fy, _, _ = self.intrinsics
        if not (fx > 0 and fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={fx} fy={fy}")
        pose = np.asarray(self.pose, dtype=np.float64)
        if pose.shape != (4, 4):
            raise ValueError(f"pose must be 4x4, got {pose.shape}")
        depth = np.asarray(self.depth, dtype=np.float64)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim == 2:
            feats = feats[..., None]
        if feats.shape[:2] != depth.shape:
            raise ValueError(f"features {feats.shape} do not match depth {depth.shape}")
        object.__setattr__(self, 'pose', pose)
        object.__setattr__(self, 'depth', depth)
        object.__setattr__(self, 'features', feats)

    @property
    def channels(self) -> int:
        return self.features.shape[2]


def _check_rigid(pose: np.ndarray, tol: float = 1e-6):
    rot = pose[:3, :3]
    if not np.allclose(rot @ rot.T, np.eye(3), atol=tol):
        raise ValueError("pose rotation is not orthonormal")
    if abs(np.linalg.det(rot) - 1.0) > tol:
        raise ValueError("pose rotation must have determinant +1")
    if not np.allclose(pose[3], [0, 0, 0, 1], atol=tol):
        raise ValueError("pose bottom row must be [0, 0, 0, 1]")


# ── OPERATORS ──

def pool_points_to_grid(cloud: PointCloud, domain: FloorplanDomain,
                        resolution: int | None = None) -> FeatureGrid:
    if cloud.features is None:
        raise ValueError("pooling needs per-point feature vectors")
    res = resolution or domain.resolution
    channels = cloud.channels
    grid = np.zeros((res * res, channels), dtype=np.float64)
    if len(cloud):
        rows, cols, inside = domain.bin_points(cloud.positions[:, :2], res)
        flat = rows[inside] * res + cols[inside]
        feats = cloud.features[inside]
        for c in range(channels):
            grid[:, c] = np.bincount(flat, weights=feats[:, c], minlength=res * res)
    return FeatureGrid(grid.reshape(res, res, channels))


def unpool_grid_to_points(grid: FeatureGrid, cloud: PointCloud, domain: FloorplanDomain) -> np.ndarray:
    res, width = grid.resolution
    if res != width:
        raise ValueError(f"grid must be square, got {grid.resolution}")
    out = np.zeros((len(cloud), grid.channels), dtype=np.float64)
    if len(cloud):
        rows, cols, inside = domain.bin_points(cloud.positions[:, :2], res)
        out[inside] = grid.data[rows[inside], cols[inside]]
    if cloud.features is not None:
        if cloud.channels != grid.channels:
            raise ValueError(f"cloud has {cloud.channels} channels, grid has {grid.channels}")
        out = cloud.features + out
    return out


def unproject_frame(frame: CameraFrame) -> PointCloud:
    _check_rigid(frame.pose)
    fx, fy, cx, cy = frame.intrinsics
    v, u = np.nonzero(frame.depth > 0)
    d = frame.depth[v, u]
    cam = np.stack([(u - cx) * d / fx, (v - cy) * d / fy, d], axis=1)
    world = cam @ frame.pose[:3, :3].T + frame.pose[:3, 3]
    return PointCloud(world, features=frame.features[v, u].reshape(len(d), frame.channels))


def pool_image_features(frames: list, domain: FloorplanDomain, stride: int | None = None,
                        resolution: int | None = None, channels: int = 0) -> FeatureGrid:
    stride = stride or config.IMAGE_POOL_STRIDE
    res = resolution or domain.resolution
    if not frames:
        return FeatureGrid(np.zeros((res, res, channels)))
    counts = {f.channels for f in frames}
    if len(counts) != 1:
        raise ValueError(f"frames disagree on feature channel count: {sorted(counts)}")
    picked = frames[::stride]
    clouds = [unproject_frame(f) for f in picked]
    merged = PointCloud(np.concatenate([c.positions for c in clouds]),
                        features=np.concatenate([c.features for c in clouds]))
    log("features", f"image pool frames={len(frames)} used={len(picked)} points={len(merged)}")
    return pool_points_to_grid(merged, domain, res)


# ── FRAME FILES ──

def _read_raw(path: Path, magic: bytes, dims: int) -> tuple:
    raw = path.read_bytes()
    head = 4 + 4 * dims
    if len(raw) < head or raw[:4] != magic:
        raise FrameFormatError(f"{path}: bad header, expected magic {magic.decode()}")
    shape = struct.unpack('<' + 'I' * dims, raw[4:head])
    count = int(np.prod(shape))
    if len(raw) != head + 4 * count:
        raise FrameFormatError(f"{path}: expected {count} float32 values, file holds {(len(raw) - head) // 4}")
    return shape, np.frombuffer(raw, dtype='<f4', count=count, offset=head)


def read_frame_set(directory) -> list:
    """Frames NNNN.{depth.raw,feat.raw,pose.txt} plus one intrinsics.txt, in index order."""
    directory = Path(directory)
    intr_path = directory / 'intrinsics.txt'
    if not intr_path.exists():
        raise FrameFormatError(f"{intr_path}: missing")
    try:
        intrinsics = tuple(float(v) for v in intr_path.read_text(encoding='utf-8').split())
    except ValueError as e:
        raise FrameFormatError(f"{intr_path}: {e}") from e
    if len(intrinsics) != 4:
        raise FrameFormatError(f"{intr_path}: expected 'fx fy cx cy'")

    indices = sorted(int(m.group(1)) for p in directory.iterdir()
                     if (m := re.fullmatch(r'(\d{4})\.depth\.raw', p.name)))
    frames = []
    for idx in indices:
        stem = f"{idx:04d}"
        (w, h), depth = _read_raw(directory / f"{stem}.depth.raw", b'FGD1', 2)
        (fw, fh, c), feats = _read_raw(directory / f"{stem}.feat.raw", b'FGF1', 3)
        if (fw, fh) != (w, h):
            raise FrameFormatError(f"{stem}: feature size {fw}x{fh} != depth size {w}x{h}")
        try:
            pose = np.array([float(v) for v in (directory / f"{stem}.pose.txt").read_text().split()])
        except (OSError, ValueError) as e:
            raise FrameFormatError(f"{stem}.pose.txt: {e}") from e
        if pose.size != 16:
            raise FrameFormatError(f"{stem}.pose.txt: expected 16 values, got {pose.size}")
        frames.append(CameraFrame(intrinsics, pose.reshape(4, 4),
                                  depth.reshape(h, w), feats.reshape(h, w, c)))
    return frames


def write_frame_set(directory, frames: list):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not frames:
        return
    fx, fy, cx, cy = (float(v) for v in frames[0].intrinsics)
    (directory / 'intrinsics.txt').write_text(f"{fx!r} {fy!r} {cx!r} {cy!r}\n", encoding='utf-8')
    for i, f in enumerate(frames):
        h, w = f.depth.shape
        stem = f"{i:04d}"
        (directory / f"{stem}.depth.raw").write_bytes(
            b'FGD1' + struct.pack('<II', w, h) + f.depth.astype('<f4').tobytes())
        (directory / f"{stem}.feat.raw").write_bytes(
            b'FGF1' + struct.pack('<III', w, h, f.channels) + f.features.astype('<f4').tobytes())
        rows = "\n".join(" ".join(repr(float(v)) for v in row) for row in f.pose)
        (directory / f"{stem}.pose.txt").write_text(rows + "\n", encoding='utf-8')
