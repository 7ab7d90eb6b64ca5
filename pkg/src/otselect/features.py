"""Feature ingestion: sparse sign projection, row normalization, EVF file I/O.

Raw per-example vectors (typically proxy-gradient dumps) are compressed with
a seeded sparse sign projection and rescaled to unit norm, which is the
representation every downstream stage assumes. The EVF binary format is the
on-disk interchange for feature matrices; CSV is accepted for raw input.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from . import _threads

_EVF_MAGIC = b"EVF1"
_EVF_VERSION = 1

# Columns of the projection matrix are generated in chunks this wide so the
# matrix never has to be materialized in full.
_PROJ_COL_BLOCK = 2048


class FeatureError(ValueError):
    """Invalid feature data: bad shapes, zero rows, non-finite entries."""


class EvfFormatError(ValueError):
    """Malformed EVF file: bad magic, version, or truncated payload."""


def _check_finite(data: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data).all(axis=1))[0, 0])
        raise FeatureError(f"{what} contains a non-finite entry (first bad row {bad})")


@dataclass
class RawFeatureMatrix:
    """Unprocessed n x d_in feature rows, optionally tagged with string ids."""

    data: np.ndarray
    ids: list[str] | None = None

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise FeatureError(f"raw feature matrix must be 2-D and non-empty, got shape {self.data.shape}")
        _check_finite(self.data, "raw feature matrix")
        if self.ids is not None and len(self.ids) != self.data.shape[0]:
            raise FeatureError("ids length does not match row count")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d_in(self) -> int:
        return self.data.shape[1]


@dataclass
class FeatureMatrix:
    """n x d matrix whose rows are unit-norm feature vectors."""

    data: np.ndarray
    seed: int = 0
    ids: list[str] | None = None

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise FeatureError(f"feature matrix must be 2-D and non-empty, got shape {self.data.shape}")
        _check_finite(self.data, "feature matrix")
        norms = np.linalg.norm(self.data, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-6:
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise FeatureError(f"row {worst} has norm {norms[worst]:.9f}, expected 1 within 1e-6")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass
class ProjectionSpec:
    """Parameters of the seeded sparse sign projection."""

    d_in: int
    d_out: int = 1024
    sparsity: float = field(default=0.0)  # 0 means "use 1/sqrt(d_out)"
    seed: int = 0
    identity: bool = False  # test mode: skip projection, requires d_out == d_in

    def __post_init__(self) -> None:
        if self.d_out < 1:
            raise FeatureError("d_out must be >= 1")
        if self.sparsity == 0.0:
            self.sparsity = 1.0 / np.sqrt(self.d_out)
        if not 0.0 < self.sparsity <= 1.0:
            raise FeatureError(f"sparsity must be in (0, 1], got {self.sparsity}")
        if self.identity and self.d_out != self.d_in:
            raise FeatureError("identity projection requires d_out == d_in")
        self.seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF


def _projection_columns(spec: ProjectionSpec, j0: int, j1: int) -> np.ndarray:
    """Dense d_out x (j1-j0) slice of the projection matrix.

    Entry (i, j) comes from a Philox stream keyed by (seed, j) at position i,
    so any column can be regenerated independently of the rest.
    """
    scale = 1.0 / np.sqrt(spec.sparsity * spec.d_out)
    cols = np.empty((spec.d_out, j1 - j0), dtype=np.float64)
    for j in range(j0, j1):
        rng = Generator(Philox(key=np.array([spec.seed, np.uint64(j)], dtype=np.uint64)))
        u = rng.random(spec.d_out)
        signs = np.where(rng.random(spec.d_out) < 0.5, -scale, scale)
        cols[:, j - j0] = np.where(u < spec.sparsity, signs, 0.0)
    return cols


def project(raw: RawFeatureMatrix, spec: ProjectionSpec) -> FeatureMatrix:
    """Apply the sparse sign projection and rescale every row to unit norm."""
    if spec.d_in != raw.d_in:
        raise FeatureError(f"spec.d_in {spec.d_in} does not match raw d_in {raw.d_in}")
    if spec.identity:
        projected = raw.data.copy()
    else:
        projected = np.zeros((raw.n, spec.d_out), dtype=np.float64)
        for j0 in range(0, raw.d_in, _PROJ_COL_BLOCK):
            j1 = min(j0 + _PROJ_COL_BLOCK, raw.d_in)
            block = _projection_columns(spec, j0, j1)
            projected += _threads.matmul(raw.data[:, j0:j1], block.T)
    norms = np.linalg.norm(projected, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise FeatureError(f"row {int(zero[0])} projects to the zero vector and cannot be normalized")
    return FeatureMatrix(projected / norms[:, None], seed=spec.seed, ids=raw.ids)


def normalize_rows(m: RawFeatureMatrix) -> FeatureMatrix:
    """Divide each row by its Euclidean norm."""
    norms = np.linalg.norm(m.data, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise FeatureError(f"row {int(zero[0])} is all zeros and cannot be normalized")
    return FeatureMatrix(m.data / norms[:, None], ids=m.ids)


def write_evf(m: FeatureMatrix, path: str) -> None:
    """Write a feature matrix in the EVF binary format (f32 payload)."""
    n, d = m.n, m.d
    with open(path, "wb") as fh:
        fh.write(_EVF_MAGIC)
        fh.write(struct.pack("<III", _EVF_VERSION, n, d))
        fh.write(np.ascontiguousarray(m.data, dtype="<f4").tobytes())
        if m.ids is not None:
            fh.write(struct.pack("<I", n))
            for s in m.ids:
                raw = s.encode("utf-8")
                if len(raw) > 0xFFFF:
                    raise FeatureError(f"id too long for EVF trailer: {len(raw)} bytes")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)


def read_evf(path: str) -> FeatureMatrix:
    """Read an EVF file back into a feature matrix.

    The payload is stored as f32; values are returned upcast to f64, which is
    exact, so write/read round-trips are bit-preserving at f32 precision.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise EvfFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    if blob[:4] != _EVF_MAGIC:
        raise EvfFormatError(f"{path}: bad magic {blob[:4]!r}")
    version, n, d = struct.unpack_from("<III", blob, 4)
    if version != _EVF_VERSION:
        raise EvfFormatError(f"{path}: unsupported version {version}")
    need = 16 + 4 * n * d
    if len(blob) < need:
        raise EvfFormatError(f"{path}: truncated payload ({len(blob)} of {need} bytes)")
    data = np.frombuffer(blob, dtype="<f4", count=n * d, offset=16).reshape(n, d)
    if not np.all(np.isfinite(data)):
        raise EvfFormatError(f"{path}: non-finite entry in payload")
    ids: list[str] | None = None
    off = need
    if off < len(blob):
        (id_count,) = struct.unpack_from("<I", blob, off)
        off += 4
        if id_count not in (0, n):
            raise EvfFormatError(f"{path}: id_count {id_count} must be 0 or {n}")
        ids = [] if id_count else None
        for _ in range(id_count):
            if off + 2 > len(blob):
                raise EvfFormatError(f"{path}: truncated id trailer")
            (ln,) = struct.unpack_from("<H", blob, off)
            off += 2
            if off + ln > len(blob):
                raise EvfFormatError(f"{path}: truncated id string")
            ids.append(blob[off:off + ln].decode("utf-8"))
            off += ln
        if id_count == 0:
            ids = None
    return FeatureMatrix(data.astype(np.float64), ids=ids)


def read_csv(path: str) -> RawFeatureMatrix:
    """Read raw features from headerless comma-separated decimal rows."""
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FeatureError(f"{path}: {exc}") from exc
    return RawFeatureMatrix(data)


def read_features(path: str) -> FeatureMatrix:
    """Load a feature matrix from EVF, or from CSV with row normalization."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _EVF_MAGIC:
        return read_evf(path)
    return normalize_rows(read_csv(path))
