"""Time grids and seeded Brownian driver paths.

Each path owns an independent Philox4x64 counter-based stream keyed by
``(seed, path_index)``, so path ``m`` is the same no matter which block of
paths it was generated in or in what order the blocks ran. Gaussians are
produced by the inverse normal CDF applied to 53-bit uniforms taken from the
raw 64-bit outputs; numpy's ``standard_normal`` is avoided on purpose since
its algorithm is not pinned across releases.
"""
from __future__ import annotations

import csv
import io
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from martdim.errors import FormatError, InvalidArgument

GAUSSIAN_TRANSFORM = "philox4x64-ndtri"

MAGIC = b"MDBP"
FORMAT_VERSION = 1
FLAG_DERIVED = 1

# magic, version, flags, T, N, d, M, seed, transform name
_HEADER = struct.Struct("<4sHHdQQQQ16s")
HEADER_SIZE = _HEADER.size


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0 = t_0 < ... < t_N = T``."""

    T: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.T) or self.T <= 0:
            raise InvalidArgument(f"horizon T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidArgument(f"step count N must be a positive integer, got {self.N}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.N + 1, dtype=np.float64) * self.dt
        t[-1] = self.T
        return t

    def index_of(self, t: float) -> int:
        """Grid index closest to time ``t``."""
        if t < 0 or t > self.T * (1 + 1e-12):
            raise InvalidArgument(f"time {t} outside [0, {self.T}]")
        return int(round(t / self.dt))


def make_grid(T: float, N: int) -> TimeGrid:
    return TimeGrid(float(T), int(N))


@dataclass(frozen=True)
class BrownianPaths:
    """``values`` has shape ``(M, N + 1, d)``; it is made read-only on construction."""

    grid: TimeGrid
    values: np.ndarray
    seed: int
    derived: bool = False
    transform: str = GAUSSIAN_TRANSFORM
    meta: dict = field(default_factory=dict, compare=False)
    steps: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[1] != self.grid.N + 1:
            raise InvalidArgument(
                f"values must have shape (M, {self.grid.N + 1}, d), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.steps is not None:
            s = np.asarray(self.steps, dtype=np.float64)
            if s.shape != (v.shape[0], v.shape[1] - 1, v.shape[2]):
                raise InvalidArgument(f"increments shape {s.shape} does not match values {v.shape}")
            s.setflags(write=False)
            object.__setattr__(self, "steps", s)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[2]

    @property
    def increments(self) -> np.ndarray:
        """Per-step increments.

        Generated sets keep the drawn increments (``values`` is their prefix
        sum), so integrating the identity reproduces ``values`` bit for bit.
        Loaded sets fall back to differencing ``values``.
        """
        if self.steps is not None:
            return self.steps
        return np.diff(self.values, axis=1)

    def __eq__(self, other):
        if not isinstance(other, BrownianPaths):
            return NotImplemented
        return (self.grid == other.grid and self.seed == other.seed
                and self.derived == other.derived
                and self.transform == other.transform
                and self.values.shape == other.values.shape
                and bool(np.array_equal(self.values.view(np.uint64),
                                        other.values.view(np.uint64))))

    __hash__ = None


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InvalidArgument(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


def path_normals(seed: int, m: int, count: int) -> np.ndarray:
    """Standard normals for path ``m``: draw ``k`` is the ``k``-th counter output."""
    bitgen = np.random.Philox(key=np.array([seed, m], dtype=np.uint64))
    raw = bitgen.random_raw(count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def generate_brownian(grid: TimeGrid, d: int, M: int, seed: int,
                      paths: range | None = None, workers: int = 1) -> BrownianPaths:
    """Generate ``M`` driver paths in ``R^d`` on ``grid``.

    ``paths`` restricts generation to a sub-block of path indices (the block is
    returned on its own and is identical to the matching slice of the full set).
    ``workers > 1`` splits the block across a thread pool; output does not
    depend on the schedule.
    """
    if int(d) != d or d < 1:
        raise InvalidArgument(f"driver dimension d must be >= 1, got {d}")
    if int(M) != M or M < 1:
        raise InvalidArgument(f"path count M must be >= 1, got {M}")
    seed = _check_seed(seed)
    block = range(M) if paths is None else paths
    if block.step != 1 or block.start < 0 or block.stop > M or len(block) == 0:
        raise InvalidArgument(f"path block {block} not a contiguous subrange of range({M})")

    steps = np.empty((len(block), grid.N, d))
    offset = block.start
    if workers <= 1 or len(block) < 2 * workers:
        _fill_into(steps, grid, seed, offset, block.start, block.stop)
    else:
        edges = np.linspace(block.start, block.stop, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_fill_into, steps, grid, seed, offset, a, b)
                       for a, b in zip(edges[:-1], edges[1:]) if b > a]
            for f in futures:
                f.result()
    values = np.zeros((len(block), grid.N + 1, d))
    np.cumsum(steps, axis=1, out=values[:, 1:])
    return BrownianPaths(grid, values, seed, meta={"paths": [block.start, block.stop]},
                         steps=steps)


def _fill_into(steps, grid, seed, offset, start, stop):
    d = steps.shape[2]
    scale = np.sqrt(grid.dt)
    for m in range(start, stop):
        steps[m - offset] = path_normals(seed, m, grid.N * d).reshape(grid.N, d) * scale


def paths_from_values(grid: TimeGrid, values: np.ndarray, seed: int = 0,
                      derived: bool = True, increments: np.ndarray | None = None) -> BrownianPaths:
    """Wrap a precomputed array (e.g. a reduced driver) as a path set."""
    return BrownianPaths(grid, np.array(values, dtype=np.float64), int(seed), derived=derived,
                         steps=increments)


# -- persistence ------------------------------------------------------------

def _encode(paths: BrownianPaths) -> bytes:
    name = paths.transform.encode("ascii")
    if len(name) > 16:
        raise InvalidArgument(f"transform name too long for header: {paths.transform}")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, FLAG_DERIVED if paths.derived else 0,
                          paths.grid.T, paths.grid.N, paths.d, paths.M, paths.seed,
                          name.ljust(16, b"\0"))
    payload = np.ascontiguousarray(paths.values, dtype="<f8").tobytes()
    return header + payload


def save_paths(paths: BrownianPaths, destination) -> Path:
    """Write the binary path file atomically; returns the final path."""
    from martdim.io import atomic_write_bytes

    return atomic_write_bytes(destination, _encode(paths))


def decode_paths(blob: bytes) -> BrownianPaths:
    if len(blob) < HEADER_SIZE:
        raise FormatError(f"truncated header: {len(blob)} of {HEADER_SIZE} bytes", len(blob))
    magic, version, flags, T, N, d, M, seed, name = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}", 4)
    if flags & ~FLAG_DERIVED:
        raise FormatError(f"unknown flag bits {flags:#x}", 6)
    if not (np.isfinite(T) and T > 0):
        raise FormatError(f"invalid horizon T={T}", 8)
    if N < 1 or d < 1 or M < 1:
        raise FormatError(f"invalid dimensions N={N} d={d} M={M}", 16)
    expected = HEADER_SIZE + 8 * M * (N + 1) * d
    if len(blob) != expected:
        raise FormatError(
            f"payload length mismatch: header declares M={M}, N={N}, d={d} "
            f"({expected} bytes total) but file has {len(blob)} bytes",
            min(len(blob), expected))
    values = np.frombuffer(blob, dtype="<f8", offset=HEADER_SIZE).reshape(M, N + 1, d)
    try:
        transform = name.rstrip(b"\0").decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError("transform name is not ASCII", 48) from exc
    return BrownianPaths(TimeGrid(T, N), values.astype(np.float64), seed,
                         derived=bool(flags & FLAG_DERIVED), transform=transform)


def load_paths(source) -> BrownianPaths:
    return decode_paths(Path(source).read_bytes())


def regenerate(paths: BrownianPaths) -> BrownianPaths:
    """Regenerate a (non-derived) path set from its stored seed and shape."""
    if paths.derived:
        raise InvalidArgument("derived drivers carry no generating seed")
    return generate_brownian(paths.grid, paths.d, paths.M, paths.seed)


def paths_to_csv(paths: BrownianPaths, max_paths: int | None = None) -> str:
    """CSV text with header ``t,path,coord,value`` (coordinates 1-based)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "path", "coord", "value"])
    times = paths.grid.times
    count = paths.M if max_paths is None else min(max_paths, paths.M)
    for m in range(count):
        for i, t in enumerate(times):
            for j in range(paths.d):
                writer.writerow([repr(float(t)), m, j + 1, repr(float(paths.values[m, i, j]))])
    return buf.getvalue()
