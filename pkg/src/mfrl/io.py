"""File formats and seed derivation.

CSV files start with a block of ``# key: value`` metadata lines (config hash,
seed, package versions), followed by a mandatory header row and
comma-separated rows.  Floats are written with ``repr`` precision, so equal
inputs give byte-identical files.

Q tables are stored as a pair: ``<base>.bin`` holds the numbers and
``<base>.csv`` the same table in readable form.  The binary layout is
little-endian::

    b"QTB1"
    uint32  n_grid, n_profiles, simplex dimension, lattice resolution
    float64 gamma, kappa (nan for exact tables)
    uint64  episode count (0 for exact tables)
    float64 values, row-major (n_grid x n_profiles)
    int64   visit counts, row-major (all zero for exact tables)
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__

_QMAGIC = b"QTB1"

# Each consumer of randomness owns a fixed stream id.  Adding a new stream
# never changes the numbers drawn by existing ones.
SEED_STREAMS = {"env": 0, "mfq": 1, "ddpg": 2, "evaluate": 3, "acceptance": 4, "probe": 5}


def derive_rng(seed: int, stream: str) -> np.random.Generator:
    """Independent generator for ``stream``: ``SeedSequence(seed, spawn_key=(id,))``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(SEED_STREAMS[stream],)))


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def metadata(config_digest: str = "none", seed: int | None = None, **extra) -> dict:
    meta = {
        "config_hash": config_digest,
        "seed": "none" if seed is None else str(seed),
        "mfrl": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    meta.update({k: str(v) for k, v in extra.items()})
    return meta


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]
    lines.append(",".join(header))
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row of length {len(row)} does not match header of length {len(header)}")
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


@dataclass
class CsvTable:
    meta: dict
    header: list
    rows: list

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.array([float(r[i]) for r in self.rows])


def read_csv(path) -> CsvTable:
    meta, header, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    if header is None:
        raise ValueError(f"{path}: missing header row")
    return CsvTable(meta, header, rows)


@dataclass
class StoredQTable:
    dimension: int
    resolution: int
    gamma: float
    kappa: float
    episodes: int
    values: np.ndarray
    counts: np.ndarray


def save_qtable(base, values, *, dimension: int, resolution: int, gamma: float, kappa: float = float("nan"),
                episodes: int = 0, counts=None, points=None, meta: dict | None = None) -> tuple[Path, Path]:
    """Write ``<base>.bin`` and ``<base>.csv``; ``points`` (lattice coordinates) label the CSV rows."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values, dtype=float)
    n_grid, n_prof = values.shape
    counts = np.zeros((n_grid, n_prof), dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
    bin_path = base.with_suffix(".bin")
    with open(bin_path, "wb") as fh:
        fh.write(_QMAGIC)
        fh.write(struct.pack("<4I", n_grid, n_prof, dimension, resolution))
        fh.write(struct.pack("<2d", gamma, kappa))
        fh.write(struct.pack("<Q", episodes))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(counts, dtype="<i8").tobytes())
    header = ["grid_index", *[f"mu_{i}" for i in range(dimension)], *[f"q_{k}" for k in range(n_prof)]]
    rows = []
    for g in range(n_grid):
        coords = list(points[g]) if points is not None else [float("nan")] * dimension
        rows.append([g, *coords, *values[g]])
    m = dict(meta or {})
    m.update(gamma=_fmt(gamma), kappa=_fmt(kappa), episodes=episodes, resolution=resolution)
    csv_path = write_csv(base.with_suffix(".csv"), header, rows, m)
    return bin_path, csv_path


def load_qtable(path) -> StoredQTable:
    path = Path(path)
    data = path.with_suffix(".bin").read_bytes()
    if data[:4] != _QMAGIC:
        raise ValueError(f"{path}: not a Q table file")
    n_grid, n_prof, dim, res = struct.unpack_from("<4I", data, 4)
    gamma, kappa = struct.unpack_from("<2d", data, 20)
    (episodes,) = struct.unpack_from("<Q", data, 36)
    pos = 44
    n = n_grid * n_prof
    values = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(n_grid, n_prof).astype(float)
    counts = np.frombuffer(data, dtype="<i8", count=n, offset=pos + 8 * n).reshape(n_grid, n_prof).astype(np.int64)
    return StoredQTable(dim, res, gamma, kappa, int(episodes), values, counts)
