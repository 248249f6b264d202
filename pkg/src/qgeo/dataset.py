"""Datasets, pipeline configuration and on-disk formats.

Formats
-------
CSV
    UTF-8, comma separated, one sample per row, header row required. A first
    column named ``id`` holds sample identifiers.
QGEO binary
    ``b"QGEO"``, little-endian ``u64`` rows, ``u64`` cols, then row-major
    little-endian float64. A file may hold several such blocks back to back.
JSON config
    An object keyed by :class:`PipelineConfig` field names (``lambda`` for
    the normalization exponent).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import DatasetFormatError, ValidationError

log = logging.getLogger(__name__)

MAGIC = b"QGEO"
_HEADER = struct.Struct("<4sQQ")


@dataclass(frozen=True, eq=False)
class Dataset:
    """N samples in extrinsic coordinates, with optional string ids."""

    points: np.ndarray
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValidationError(f"points must be 2-D, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise ValidationError(f"need at least 2 samples, got {pts.shape[0]}")
        if pts.shape[1] < 1:
            raise ValidationError("need at least 1 coordinate")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise ValidationError(f"non-finite entry at row {bad[0]}, col {bad[1]}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != pts.shape[0]:
                raise ValidationError(f"{len(ids)} ids for {pts.shape[0]} samples")
            if len(set(ids)) != len(ids):
                raise ValidationError("ids must be unique")
            object.__setattr__(self, "ids", ids)

    @property
    def n_samples(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def labels(self) -> list[str]:
        """Ids if present, otherwise row indices as strings."""
        return list(self.ids) if self.ids is not None else [str(i) for i in range(self.n_samples)]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.ids == other.ids and np.array_equal(self.points, other.points)

    def __len__(self):
        return self.n_samples


ESTIMATORS = ("mean", "mean-lpca", "max")
MOMENTUM_MODES = ("neighbor", "random")


@dataclass(frozen=True)
class PipelineConfig:
    """All tunables of the geodesic pipeline.

    ``h`` is derived from ``epsilon`` and ``alpha`` and never stored.
    """

    epsilon: float
    alpha: float
    dt: float
    n_prop: int
    n_coll: int
    lam: float = 1.0
    use_pca: bool = False
    delta_pca: float = 1.5
    gamma: float = 0.1
    k_clusters: int = 5
    embed_dim: int = 3
    seed: int = 0
    spectral_cutoff: int | None = None
    estimator: str | None = None
    momentum: str = "neighbor"
    lpca_dim: int | None = None
    layout_iters: int = 500

    def __post_init__(self):
        def positive(name):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be a finite positive number, got {v!r}")

        def positive_int(name):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")

        for name in ("epsilon", "dt", "delta_pca"):
            positive(name)
        for name in ("n_prop", "n_coll", "k_clusters", "layout_iters"):
            positive_int(name)
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha) and self.alpha >= 1):
            raise ValidationError(f"alpha must be >= 1, got {self.alpha!r}")
        if not (0.0 <= self.lam <= 1.0):
            raise ValidationError(f"lambda must lie in [0, 1], got {self.lam!r}")
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        if self.embed_dim not in (2, 3):
            raise ValidationError(f"embed_dim must be 2 or 3, got {self.embed_dim!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not (0 <= self.seed < 2**64):
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.spectral_cutoff is not None:
            positive_int("spectral_cutoff")
        if self.lpca_dim is not None:
            positive_int("lpca_dim")
        if self.estimator is not None and self.estimator not in ESTIMATORS:
            raise ValidationError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.momentum not in MOMENTUM_MODES:
            raise ValidationError(f"momentum must be one of {MOMENTUM_MODES}, got {self.momentum!r}")

    @property
    def h(self) -> float:
        return semiclassical_h(self.epsilon, self.alpha)

    @property
    def resolved_estimator(self) -> str:
        if self.estimator is not None:
            return self.estimator
        return "mean-lpca" if self.use_pca else "mean"

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
        raw = dict(raw)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in sorted(set(raw) - known):
            log.warning("ignoring unknown config field %r", key)
            raw.pop(key)
        missing = [f.name for f in dataclasses.fields(cls)
                   if f.default is dataclasses.MISSING and f.name not in raw]
        if missing:
            raise ValidationError(f"config is missing required fields: {', '.join(missing)}")
        for name in ("epsilon", "alpha", "dt", "lam", "delta_pca", "gamma"):
            if isinstance(raw.get(name), int) and not isinstance(raw.get(name), bool):
                raw[name] = float(raw[name])
        return cls(**raw)


def semiclassical_h(epsilon: float, alpha: float) -> float:
    """h = epsilon ** (1 / (2 + alpha))."""
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if alpha < 1:
        raise ValidationError("alpha must be >= 1")
    return float(epsilon ** (1.0 / (2.0 + alpha)))


# ---------------------------------------------------------------- config io

def load_config(path: str | Path) -> PipelineConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    return PipelineConfig.from_dict(raw)


def save_config(config: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


# ------------------------------------------------------------- matrix blocks

def write_matrix(fh: BinaryIO, matrix: np.ndarray) -> None:
    m = np.asarray(matrix, dtype="<f8")
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise ValidationError("only 1-D or 2-D arrays can be written")
    fh.write(_HEADER.pack(MAGIC, m.shape[0], m.shape[1]))
    fh.write(np.ascontiguousarray(m).tobytes())


def read_matrix(fh: BinaryIO) -> np.ndarray:
    head = fh.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise DatasetFormatError("truncated QGEO header")
    magic, rows, cols = _HEADER.unpack(head)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    nbytes = rows * cols * 8
    body = fh.read(nbytes)
    if len(body) != nbytes:
        raise DatasetFormatError(f"truncated QGEO body: expected {rows}x{cols} values")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def read_matrices(path: str | Path) -> list[np.ndarray]:
    out = []
    with open(path, "rb") as fh:
        while True:
            peek = fh.peek(1) if hasattr(fh, "peek") else b"x"
            if not peek:
                break
            out.append(read_matrix(fh))
    return out


# ------------------------------------------------------------------ dataset

def _detect_format(path: Path) -> str:
    with open(path, "rb") as fh:
        return "f64-binary" if fh.read(4) == MAGIC else "csv"


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Read a dataset from CSV or QGEO binary (auto-detected when ``format`` is None)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    fmt = format or _detect_format(path)
    if fmt == "csv":
        return _load_csv(path)
    if fmt in ("f64-binary", "binary", "qgeo"):
        with open(path, "rb") as fh:
            pts = read_matrix(fh)
        return Dataset(pts)
    raise ValidationError(f"unknown dataset format {fmt!r}")


def _load_csv(path: Path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError("empty CSV file", row=1) from None
        header = [h.strip() for h in header]
        has_id = bool(header) and header[0].lower() == "id"
        width = len(header)
        ids, rows = [], []
        for rno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != width:
                raise DatasetFormatError(f"expected {width} fields, got {len(rec)}", row=rno)
            values = rec[1:] if has_id else rec
            row = []
            for cno, cell in enumerate(values, start=2 if has_id else 1):
                try:
                    row.append(float(cell))
                except ValueError:
                    raise DatasetFormatError(f"cannot parse {cell!r} as a number",
                                             row=rno, col=cno) from None
            if has_id:
                ids.append(rec[0].strip())
            rows.append(row)
    if not rows:
        raise ValidationError("CSV has no data rows")
    pts = np.array(rows, dtype=np.float64)
    if pts.shape[1] == 0:
        raise ValidationError("CSV has no coordinate columns")
    return Dataset(pts, tuple(ids) if has_id else None)


def save_dataset(dataset: Dataset, path: str | Path, format: str = "f64-binary",
                 header: Sequence[str] | None = None) -> None:
    path = Path(path)
    if format in ("f64-binary", "binary", "qgeo"):
        with open(path, "wb") as fh:
            write_matrix(fh, dataset.points)
        return
    if format != "csv":
        raise ValidationError(f"unknown dataset format {format!r}")
    cols = list(header) if header is not None else [f"x{i}" for i in range(dataset.dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["id"] if dataset.ids is not None else []) + cols)
        for i, row in enumerate(dataset.points):
            cells = [_fmt(x) for x in row]
            w.writerow(([dataset.ids[i]] if dataset.ids is not None else []) + cells)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def normalize_minmax(dataset: Dataset, per_feature: bool = False) -> Dataset:
    """Rescale to [0, 1], globally (default) or column by column.

    Constant columns (per-feature) or constant data (global) map to 0.
    """
    pts = dataset.points
    if per_feature:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    else:
        lo, hi = pts.min(), pts.max()
    span = np.where(np.asarray(hi - lo) > 0, hi - lo, 1.0)
    return Dataset((pts - lo) / span, dataset.ids)


# ---------------------------------------------------------- pipeline outputs

def save_spectral(spec, path: str | Path) -> None:
    """Write a decomposed Laplacian as four QGEO blocks.

    Blocks: ``[epsilon, lambda]`` (1x2), eigenvalues (1xk), sqrt degree
    vector (1xN), eigenvectors (Nxk).
    """
    with open(path, "wb") as fh:
        write_matrix(fh, np.array([[spec.epsilon, spec.lam]]))
        write_matrix(fh, spec.eigvals)
        write_matrix(fh, spec.dvec_sqrt)
        write_matrix(fh, spec.eigvecs)


def load_spectral(path: str | Path):
    from .laplacian import SpectralLaplacian

    blocks = read_matrices(path)
    if len(blocks) != 4:
        raise DatasetFormatError(f"expected 4 QGEO blocks, found {len(blocks)}")
    meta, vals, dsq, vecs = blocks
    return SpectralLaplacian(eigvals=vals[0], eigvecs=vecs, dvec_sqrt=dsq[0],
                             epsilon=float(meta[0, 0]), lam=float(meta[0, 1]))


def save_distance_matrix(gdm, path: str | Path, labels: Sequence[str] | None = None) -> Path:
    """Write ``i,j,d`` triplets (i < j) plus a sidecar ``<stem>.meta.json``."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "d"])
        for i, j, d in zip(gdm.rows, gdm.cols, gdm.values):
            w.writerow([int(i), int(j), _fmt(d)])
    meta = {"n": gdm.n, "config": gdm.meta.to_dict() if gdm.meta is not None else None}
    if labels is not None:
        meta["labels"] = list(labels)
    meta_path = path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return meta_path


def load_distance_matrix(path: str | Path, n: int | None = None):
    from .pipeline import GeodesicDistanceMatrix

    path = Path(path)
    meta_path = path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    rows, cols, vals = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["i", "j", "d"]:
            raise DatasetFormatError("distance CSV must start with header i,j,d", row=1)
        for rno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                rows.append(int(rec[0]))
                cols.append(int(rec[1]))
                vals.append(float(rec[2]))
            except (ValueError, IndexError):
                raise DatasetFormatError("bad triplet", row=rno) from None
    size = n if n is not None else meta.get("n")
    if size is None:
        size = (max(max(rows), max(cols)) + 1) if rows else 0
    cfg = PipelineConfig.from_dict(meta["config"]) if meta.get("config") else None
    return GeodesicDistanceMatrix.from_triplets(size, rows, cols, vals, meta=cfg)


def save_embedding(coords: np.ndarray, path: str | Path, labels: Iterable[str] | None = None,
                   clusters: np.ndarray | None = None) -> None:
    """CSV with columns ``id,x,y[,z][,cluster]``."""
    coords = np.asarray(coords, dtype=np.float64)
    labels = list(labels) if labels is not None else [str(i) for i in range(len(coords))]
    axes = ["x", "y", "z"][: coords.shape[1]]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + axes + (["cluster"] if clusters is not None else []))
        for i, row in enumerate(coords):
            rec = [labels[i]] + [_fmt(x) for x in row]
            if clusters is not None:
                rec.append(int(clusters[i]))
            w.writerow(rec)


def load_embedding(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        axes = [k for k, h in enumerate(header) if h in ("x", "y", "z")]
        if header[0] != "id" or len(axes) not in (2, 3):
            raise DatasetFormatError("embedding CSV needs id,x,y[,z] columns", row=1)
        labels, rows = [], []
        for rno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            labels.append(rec[0])
            try:
                rows.append([float(rec[k]) for k in axes])
            except ValueError:
                raise DatasetFormatError("bad coordinate", row=rno) from None
    return labels, np.array(rows, dtype=np.float64)
