"""MedMNIST-style ``.npz`` archives, a synthetic texture fixture, normalisation and splits."""
from __future__ import annotations

import ast
import struct
import zipfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

SPLITS = ("train", "val", "test")
NPY_MAGIC = b"\x93NUMPY"
# little-endian or byte-order-free descriptors only
_DTYPES = {"|u1": np.uint8, "<u1": np.uint8, "<i8": np.int64}


@dataclass
class Dataset:
    images: np.ndarray  # (N, H, W, Ch) uint8
    labels: np.ndarray  # (N,) int64
    num_classes: int
    split: str = "train"

    def __post_init__(self):
        if self.images.ndim != 4:
            raise FormatError(f"images must be N x H x W x Ch, got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise FormatError("image and label counts differ")
        if min(self.images.shape[1:3]) < 8:
            raise FormatError(f"images must be at least 8x8, got {self.images.shape[1:3]}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise FormatError("label outside [0, num_classes)")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, idx, split: str | None = None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, images=self.images[idx], labels=self.labels[idx], split=split or self.split)


# ---------------------------------------------------------------- NPY / NPZ


def read_npy(buf: bytes) -> np.ndarray:
    if buf[:6] != NPY_MAGIC:
        raise FormatError("missing NPY magic")
    major = buf[6]
    if major == 1:
        (hlen,) = struct.unpack("<H", buf[8:10])
        start = 10
    elif major in (2, 3):
        (hlen,) = struct.unpack("<I", buf[8:12])
        start = 12
    else:
        raise FormatError(f"unsupported NPY version {major}.{buf[7]}")
    if major == 3:
        raise FormatError("NPY version 3.0 (utf-8 headers) is not supported")
    try:
        header = ast.literal_eval(buf[start : start + hlen].decode("latin1"))
    except (ValueError, SyntaxError) as e:
        raise FormatError(f"malformed NPY header: {e}") from None
    if not isinstance(header, dict) or not {"descr", "fortran_order", "shape"} <= header.keys():
        raise FormatError("NPY header lacks descr/fortran_order/shape")
    descr = header["descr"]
    if descr not in _DTYPES:
        raise FormatError(f"unsupported dtype {descr!r}; expected uint8 or little-endian int64")
    if header["fortran_order"]:
        raise FormatError("Fortran-ordered arrays are not supported")
    shape = tuple(int(s) for s in header["shape"])
    dtype = np.dtype(_DTYPES[descr])
    count = int(np.prod(shape, dtype=np.int64))
    body = buf[start + hlen :]
    if len(body) != count * dtype.itemsize:
        raise FormatError(f"NPY body holds {len(body)} bytes, expected {count * dtype.itemsize}")
    return np.frombuffer(body, dtype=dtype).reshape(shape).copy()


def write_npy(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.uint8:
        descr = "|u1"
    elif arr.dtype == np.int64:
        descr = "<i8"
    else:
        raise FormatError(f"cannot write dtype {arr.dtype}")
    header = "{'descr': '%s', 'fortran_order': False, 'shape': %r, }" % (descr, tuple(arr.shape))
    # pad so the data starts on a 64-byte boundary, header ends in newline
    pad = 64 - (10 + len(header) + 1) % 64
    header = header + " " * (pad % 64) + "\n"
    raw = header.encode("latin1")
    return NPY_MAGIC + b"\x01\x00" + struct.pack("<H", len(raw)) + raw + arr.astype(arr.dtype.newbyteorder("<")).tobytes()


def read_npz(path: str | Path) -> dict[str, np.ndarray]:
    try:
        with zipfile.ZipFile(path) as zf:
            out = {}
            for name in zf.namelist():
                key = name[:-4] if name.endswith(".npy") else name
                out[key] = read_npy(zf.read(name))
            return out
    except zipfile.BadZipFile as e:
        raise OSError(f"{path}: not a readable zip archive ({e})") from None


def write_npz(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for key, arr in arrays.items():
            info = zipfile.ZipInfo(f"{key}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, write_npy(arr))


def _as_images(arr: np.ndarray, key: str) -> np.ndarray:
    if arr.dtype != np.uint8:
        raise FormatError(f"{key}: images must be uint8, got {arr.dtype}")
    if arr.ndim == 3:
        return arr[..., None]
    if arr.ndim == 4:
        return arr
    raise FormatError(f"{key}: expected (N,H,W) or (N,H,W,C), got {arr.shape}")


def load_npz_dataset(path: str | Path) -> tuple[Dataset, Dataset, Dataset]:
    arrays = read_npz(path)
    for split in SPLITS:
        for part in ("images", "labels"):
            if f"{split}_{part}" not in arrays:
                raise FormatError(f"{path}: missing key {split}_{part}")
    labels = {s: arrays[f"{s}_labels"].astype(np.int64).reshape(-1) for s in SPLITS}
    num_classes = int(max(int(l.max()) for l in labels.values() if l.size)) + 1
    num_classes = max(num_classes, 2)
    return tuple(
        Dataset(_as_images(arrays[f"{s}_images"], f"{s}_images"), labels[s], num_classes, s) for s in SPLITS
    )


def save_npz_dataset(path: str | Path, train: Dataset, val: Dataset, test: Dataset) -> None:
    arrays = {}
    for split, d in zip(SPLITS, (train, val, test)):
        imgs = d.images[..., 0] if d.images.shape[-1] == 1 else d.images
        arrays[f"{split}_images"] = imgs.astype(np.uint8)
        arrays[f"{split}_labels"] = d.labels.astype(np.uint8 if d.num_classes <= 256 else np.int64)[:, None]
    write_npz(path, arrays)


# ---------------------------------------------------------------- transforms


def normalize(d: Dataset) -> np.ndarray:
    """Images scaled to [0, 1] as an (N, H, W, Ch) float64 array."""
    return d.images.astype(np.float64) / 255.0


def synth_textures(n_per_class: int, side: int = 28, noise: float = 20.0, seed: int = 0, split: str = "train") -> Dataset:
    """Class 0: vertical stripes, class 1: checkerboard; both with a 4-pixel period."""
    if side < 8:
        raise ConfigError("side must be at least 8")
    lo, hi = 64.0, 192.0
    r, c = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    stripes = np.where((c // 2) % 2 == 0, hi, lo)
    checker = np.where(((r // 2) + (c // 2)) % 2 == 0, hi, lo)
    rng = np.random.default_rng(seed)
    base = np.concatenate([np.repeat(stripes[None], n_per_class, 0), np.repeat(checker[None], n_per_class, 0)])
    labels = np.repeat(np.arange(2, dtype=np.int64), n_per_class)
    if noise > 0:
        base = base + rng.normal(0.0, noise, size=base.shape)
    images = np.clip(np.rint(base), 0, 255).astype(np.uint8)[..., None]
    order = rng.permutation(labels.size)
    return Dataset(images[order], labels[order], 2, split)


def stratified_split(d: Dataset, fractions, seed: int = 0, names=None) -> list[Dataset]:
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.ndim != 1 or fractions.size < 1 or np.any(fractions < 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be non-negative and sum to 1, got {fractions.tolist()}")
    k = fractions.size
    names = list(names) if names is not None else [f"{d.split}{i}" for i in range(k)]
    rng = np.random.default_rng(seed)
    parts: list[list[int]] = [[] for _ in range(k)]
    for cls in range(d.num_classes):
        idx = np.flatnonzero(d.labels == cls)
        if idx.size == 0:
            continue
        if idx.size < k:
            raise ConfigError(f"class {cls} has {idx.size} samples, fewer than {k} splits")
        idx = idx[rng.permutation(idx.size)]
        raw = fractions * idx.size
        counts = np.floor(raw).astype(int)
        # largest remainder, ties to the earlier split
        for j in np.argsort(-(raw - counts), kind="stable")[: idx.size - counts.sum()]:
            counts[j] += 1
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for j in range(k):
            parts[j].extend(idx[bounds[j] : bounds[j + 1]].tolist())
    return [d.subset(np.sort(np.asarray(p, dtype=np.int64)), names[j]) for j, p in enumerate(parts)]

