"""Toy datasets, normalisation, checkpoints and CSV sample files."""
from __future__ import annotations

import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import DriftSpec
from .score import ScoreNet, TrainConfig

DATASETS = ("eight_gaussians", "two_moons", "swiss_roll_2d", "gaussian_1d")

MAGIC = b"HPP1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Normalised points plus the affine map back to data space.

    ``points = (raw - mean) / scale`` with a per-dimension ``scale``.
    """

    name: str
    points: np.ndarray
    mean: np.ndarray
    scale: np.ndarray

    @property
    def h(self) -> int:
        return self.points.shape[1]

    def denormalize(self, x) -> np.ndarray:
        return np.asarray(x) * self.scale + self.mean

    def normalize(self, raw) -> np.ndarray:
        return (np.asarray(raw) - self.mean) / self.scale


def raw_points(name: str, count: int, seed: int) -> np.ndarray:
    """Unnormalised samples, shape ``(count, h)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    if name == "eight_gaussians":
        k = rng.integers(0, 8, size=count)
        angle = 2 * np.pi * k / 8
        centres = 4.0 * np.stack([np.cos(angle), np.sin(angle)], axis=1)
        return centres + 0.1 * rng.standard_normal((count, 2))
    if name == "two_moons":
        upper = rng.random(count) < 0.5
        theta = np.pi * rng.random(count)
        x = np.where(upper, np.cos(theta), 1.0 - np.cos(theta))
        y = np.where(upper, np.sin(theta), 0.5 - np.sin(theta))
        return np.stack([x, y], axis=1) + 0.05 * rng.standard_normal((count, 2))
    if name == "swiss_roll_2d":
        t = 1.5 * np.pi * (1.0 + 2.0 * rng.random(count))
        pts = np.stack([t * np.cos(t), t * np.sin(t)], axis=1)
        return pts + 0.05 * rng.standard_normal((count, 2))
    if name == "gaussian_1d":
        return 1.5 + 0.7 * rng.standard_normal((count, 1))
    raise ValueError(f"unknown dataset {name!r}; choose from {', '.join(DATASETS)}")


def make_dataset(name: str, count: int, seed: int = 0) -> Dataset:
    raw = raw_points(name, count, seed)
    mean = raw.mean(axis=0)
    centred = raw - mean
    scale = np.sqrt(np.mean(centred**2, axis=0))
    scale[scale == 0] = 1.0
    points = centred / scale
    # second pass removes the O(eps) residual left by the first
    points -= points.mean(axis=0)
    points /= np.sqrt(np.mean(points**2, axis=0))
    return Dataset(name, points, mean, scale)


def centroids(name: str) -> np.ndarray:
    if name != "eight_gaussians":
        raise ValueError("mode centroids are only defined for eight_gaussians")
    angle = 2 * np.pi * np.arange(8) / 8
    return 4.0 * np.stack([np.cos(angle), np.sin(angle)], axis=1)


# -- atomic writes ---------------------------------------------------------


def atomic_write(path, data: bytes) -> None:
    """Write to a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- checkpoints -----------------------------------------------------------


def _fmt_seq(xs) -> str:
    return ",".join(repr(float(x)) for x in xs)


def save_checkpoint(net: ScoreNet, spec: DriftSpec, cfg: TrainConfig, path, extra: dict | None = None) -> None:
    """Magic ``HPP1``, u32 header length, ``key=value`` header, f64 payload, CRC32."""
    if net.n != spec.n:
        raise CheckpointError(f"net order {net.n} != spec order {spec.n}")
    header = {
        "version": FORMAT_VERSION,
        "n": spec.n,
        "h": net.h,
        "gammas": _fmt_seq(spec.gammas),
        "xi": repr(float(spec.xi)),
        "l_inv": repr(float(spec.l_inv)),
        "lambda_star": "none" if spec.lambda_star is None else repr(float(spec.lambda_star)),
        "layer_dims": ",".join(str(d) for d in net.layer_dims),
        "T": repr(float(cfg.T)),
        "alpha": repr(float(cfg.alpha)),
        "t_eps": repr(float(cfg.t_eps)),
        "seed": cfg.seed,
        "batch": cfg.batch,
        "iters": cfg.iters,
        "lr": repr(float(cfg.lr)),
        "lr_final": repr(float(cfg.lr_final)),
        "net_T": repr(float(net.T)),
        "n_params": net.n_params,
    }
    for key, value in (extra or {}).items():
        if "=" in key or "\n" in key or "\n" in str(value):
            raise CheckpointError(f"bad header entry {key!r}")
        header[key] = value
    text = "".join(f"{k}={v}\n" for k, v in header.items()).encode("utf-8")
    payload = net.flat().astype("<f8").tobytes()
    blob = MAGIC + struct.pack("<I", len(text)) + text + payload + struct.pack("<I", zlib.crc32(payload))
    atomic_write(path, blob)


def read_header(blob: bytes) -> tuple[dict, int]:
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    (hlen,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + hlen:
        raise CheckpointError("truncated header")
    try:
        lines = blob[8 : 8 + hlen].decode("utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise CheckpointError("corrupt header") from exc
    header = {}
    for line in lines:
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"malformed header line {line!r}")
        header[key] = value
    return header, 8 + hlen


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",")] if text else []


def load_checkpoint(path):
    """Return ``(net, spec, cfg, extra)``; ``extra`` holds unrecognised header keys."""
    blob = Path(path).read_bytes()
    header, offset = read_header(blob)
    try:
        version = int(header["version"])
    except (KeyError, ValueError) as exc:
        raise CheckpointError("missing version") from exc
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        n_params = int(header["n_params"])
        n, h = int(header["n"]), int(header["h"])
        dims = tuple(int(d) for d in header["layer_dims"].split(","))
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"incomplete header: {exc}") from exc
    end = offset + 8 * n_params
    if len(blob) != end + 4:
        raise CheckpointError(f"truncated or oversized payload ({len(blob)} bytes, expected {end + 4})")
    payload = blob[offset:end]
    (crc,) = struct.unpack("<I", blob[end:])
    if zlib.crc32(payload) != crc:
        raise CheckpointError("checksum mismatch")

    lam = header["lambda_star"]
    spec = DriftSpec(
        n=n,
        gammas=tuple(_floats(header["gammas"])),
        xi=float(header["xi"]),
        l_inv=float(header["l_inv"]),
        lambda_star=None if lam == "none" else float(lam),
    )
    cfg = TrainConfig(
        T=float(header["T"]),
        l_inv=spec.l_inv,
        alpha=float(header["alpha"]),
        batch=int(header.get("batch", 256)),
        iters=int(header.get("iters", 0)),
        lr=float(header.get("lr", 2e-3)),
        lr_final=float(header.get("lr_final", 5e-5)),
        t_eps=float(header["t_eps"]),
        seed=int(header["seed"]),
    )
    template = ScoreNet.create(n, h, hidden=dims[1:-1], seed=0, T=float(header.get("net_T", cfg.T)))
    if template.layer_dims != dims:
        raise CheckpointError(f"layer_dims {dims} inconsistent with n={n}, h={h}")
    net = template.with_flat(np.frombuffer(payload, dtype="<f8").astype(np.float64))
    known = {
        "version", "n", "h", "gammas", "xi", "l_inv", "lambda_star", "layer_dims", "T", "alpha",
        "t_eps", "seed", "batch", "iters", "lr", "lr_final", "net_T", "n_params",
    }
    extra = {k: v for k, v in header.items() if k not in known}
    return net, spec, cfg, extra


def check_compatible(net: ScoreNet, spec: DriftSpec, n: int | None = None) -> None:
    if net.n != spec.n or (n is not None and n != spec.n):
        raise CheckpointError(f"order mismatch: checkpoint has n={spec.n}, requested n={n if n is not None else net.n}")


# -- CSV ---------------------------------------------------------------------


def format_csv(points) -> bytes:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] == 0:
        raise ValueError("no points to write")
    lines = [",".join(f"dim_{d}" for d in range(points.shape[1]))]
    lines += [",".join(f"{v:.17g}" for v in row) for row in points]
    return ("\n".join(lines) + "\n").encode("ascii")


def write_csv(path, points) -> None:
    atomic_write(path, format_csv(points))


def read_csv(path) -> np.ndarray:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    head = lines[0].split(",")
    if head != [f"dim_{d}" for d in range(len(head))]:
        raise ValueError(f"{path}: expected header dim_0,...,dim_{{h-1}}")
    if len(lines) == 1:
        raise ValueError(f"{path}: no data rows")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    if any(len(r) != len(head) for r in rows):
        raise ValueError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


def nearest_centroid_shares(points, centres) -> np.ndarray:
    d = np.linalg.norm(np.asarray(points)[:, None, :] - np.asarray(centres)[None, :, :], axis=-1)
    counts = np.bincount(np.argmin(d, axis=1), minlength=len(centres))
    return counts / max(len(points), 1)


def energy_distance(x, y) -> float:
    """Squared energy distance ``2E|X-Y| - E|X-X'| - E|Y-Y'|`` (V-statistic).

    The V-statistic keeps the zero self-distances, so it is non-negative and
    two samples of one distribution give a small positive value of order
    ``E|X-X'| (1/len(x) + 1/len(y))``.
    """
    from scipy.spatial.distance import cdist

    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise ValueError("dimension mismatch")
    xy = cdist(x, y).mean()
    xx = cdist(x, x).mean()
    yy = cdist(y, y).mean()
    return float(2 * xy - xx - yy)


__all__ = [
    "DATASETS",
    "CheckpointError",
    "Dataset",
    "centroids",
    "check_compatible",
    "energy_distance",
    "load_checkpoint",
    "make_dataset",
    "nearest_centroid_shares",
    "raw_points",
    "read_csv",
    "save_checkpoint",
    "write_csv",
]
