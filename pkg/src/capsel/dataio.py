"""Dataset ingestion: binary PGM and the XTRT raw-tensor container.

Every image is z-scored per image (over all channels and pixels, biased
std) at load time; constant images become all zeros and are flagged.

XTRT layout, little-endian: magic ``XTRT``, version byte 0x01, u8 rank,
rank u32 dims, then float32 payload in row-major order. Rank 2 files are
read as single-channel (1, H, W); rank 3 as (C, H, W).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .tensor import check_finite

__all__ = [
    "ImageStats",
    "DatasetSample",
    "read_pgm",
    "write_pgm",
    "read_xtrt",
    "write_xtrt",
    "zscore",
    "load_dataset",
    "sample_images",
]

XTRT_MAGIC = b"XTRT"
XTRT_VERSION = 1
SUPPORTED_SUFFIXES = (".pgm", ".xtrt")

_SAMPLE_STREAM = 0  # SeedSequence stream tag for image sampling


def _pgm_token(buf: bytes, offset: int) -> tuple[bytes, int]:
    """Next header token, skipping whitespace and '#' comments."""
    n = len(buf)
    while offset < n:
        c = buf[offset:offset + 1]
        if c == b"#":
            while offset < n and buf[offset:offset + 1] not in (b"\n", b"\r"):
                offset += 1
        elif c.isspace():
            offset += 1
        else:
            break
    start = offset
    while offset < n and not buf[offset:offset + 1].isspace():
        offset += 1
    if start == offset:
        raise ValueError("truncated header")
    return buf[start:offset], offset


def read_pgm(path) -> np.ndarray:
    """Decode a binary (P5) PGM into a (1, H, W) float64 array.

    Sample values are kept as raw integers; 16-bit files use big-endian
    samples, most significant byte first.
    """
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"unreadable file {path}: {exc}") from exc
    try:
        magic, offset = _pgm_token(buf, 0)
        if magic != b"P5":
            raise ValidationError(f"{path}: not a binary PGM (magic {magic!r})")
        fields = []
        for _ in range(3):
            token, offset = _pgm_token(buf, offset)
            fields.append(int(token))
        width, height, maxval = fields
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0:
        raise ValidationError(f"{path}: nonpositive PGM dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise ValidationError(f"{path}: PGM maxval {maxval} outside 1..65535")
    offset += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    raster = buf[offset:offset + count * dtype.itemsize]
    if len(raster) != count * dtype.itemsize:
        raise ValidationError(f"{path}: PGM raster truncated")
    img = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return img.astype(np.float64)[None, :, :]


def write_pgm(path, image: np.ndarray, maxval: int = 255) -> None:
    """Write a (H, W) integer-valued array as binary PGM."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValidationError(f"write_pgm expects a 2D array, got shape {img.shape}")
    if not 0 < maxval < 65536:
        raise ValidationError(f"maxval {maxval} outside 1..65535")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + img.astype(dtype).tobytes())


def read_xtrt(path) -> np.ndarray:
    """Decode an XTRT file into a (C, H, W) float64 array."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"unreadable file {path}: {exc}") from exc
    if len(buf) < 6 or buf[:4] != XTRT_MAGIC:
        raise ValidationError(f"{path}: missing XTRT magic")
    version, rank = buf[4], buf[5]
    if version != XTRT_VERSION:
        raise ValidationError(f"{path}: unsupported XTRT version {version}")
    if rank not in (2, 3):
        raise ValidationError(f"{path}: XTRT rank {rank} unsupported (want 2 or 3)")
    head_end = 6 + 4 * rank
    if len(buf) < head_end:
        raise ValidationError(f"{path}: XTRT header truncated")
    dims = struct.unpack(f"<{rank}I", buf[6:head_end])
    if any(d == 0 for d in dims):
        raise ValidationError(f"{path}: zero extent in dims {dims}")
    count = int(np.prod(dims))
    payload = buf[head_end:]
    if len(payload) != 4 * count:
        raise ValidationError(
            f"{path}: payload holds {len(payload) // 4} floats, dims {dims} need {count}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float64)
    check_finite(arr, str(path))
    if rank == 2:
        arr = arr[None, :, :]
    return arr


def write_xtrt(path, array: np.ndarray) -> None:
    """Write a rank-2 or rank-3 array as an XTRT file (float32 payload)."""
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValidationError(f"write_xtrt expects rank 2 or 3, got shape {arr.shape}")
    check_finite(arr, "xtrt payload")
    header = XTRT_MAGIC + bytes([XTRT_VERSION, arr.ndim])
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.astype("<f4").tobytes())


@dataclass(frozen=True)
class ImageStats:
    """Per-image z-score record."""

    mean: float
    std: float
    constant: bool


def zscore(image: np.ndarray) -> tuple[np.ndarray, ImageStats]:
    """Per-image standardization over all channels and pixels (biased std).

    Constant images cannot be standardized; they come back as all zeros with
    the ``constant`` flag set.
    """
    img = np.asarray(image, dtype=np.float64)
    mean = float(img.mean())
    std = float(img.std())
    if std == 0.0:
        return np.zeros_like(img), ImageStats(mean=mean, std=std, constant=True)
    return (img - mean) / std, ImageStats(mean=mean, std=std, constant=False)


@dataclass(frozen=True)
class DatasetSample:
    """Z-scored images stacked as (n, C, H, W) plus provenance."""

    images: np.ndarray
    paths: tuple[str, ...]
    stats: tuple[ImageStats, ...]

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def constant_image_names(self) -> tuple[str, ...]:
        return tuple(Path(p).name for p, s in zip(self.paths, self.stats) if s.constant)


def _read_image(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    return read_xtrt(path)


def load_dataset(directory, expected_shape: tuple[int, int, int] | None = None) -> DatasetSample:
    """Load every supported image under ``directory`` (sorted by name).

    All images must share one (C, H, W) shape; the first image (or
    ``expected_shape``) sets it and any mismatch names the offending file.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ValidationError(f"dataset directory {directory} does not exist")
    files = sorted(p for p in directory.iterdir()
                   if p.is_file() and p.suffix.lower() in SUPPORTED_SUFFIXES)
    if not files:
        raise ValidationError(
            f"no {'/'.join(SUPPORTED_SUFFIXES)} files in {directory}"
        )
    images, stats = [], []
    shape = tuple(expected_shape) if expected_shape is not None else None
    for path in files:
        img = _read_image(path)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValidationError(
                f"{path}: image shape {img.shape} does not match expected {shape}"
            )
        z, st = zscore(img)
        images.append(z)
        stats.append(st)
    return DatasetSample(
        images=np.stack(images, axis=0),
        paths=tuple(str(p) for p in files),
        stats=tuple(stats),
    )


def sample_images(ds: DatasetSample, k: int, seed: int) -> np.ndarray:
    """Uniform sample of ``k`` images without replacement, as one batch.

    Deterministic for a fixed (dataset order, k, seed); uses its own seed
    stream so weight draws elsewhere stay independent of the sample.
    """
    n = len(ds)
    if not 1 <= k <= n:
        raise ValidationError(f"sample size {k} outside 1..{n}")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), _SAMPLE_STREAM)))
    idx = rng.choice(n, size=k, replace=False)
    return ds.images[idx]
