"""Row-partitioned dense forward operators and problem builders.

Covers the two benchmark problems (a 1-D integral equation with a sparse
signal, and parallel-beam tomography of a disk phantom), the interleaved
row partition used for mini-batching, and Boyd's power method for operator
norms between l^r spaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DimensionMismatchError, InvalidInputError
from .spaces import SpaceDescriptor, duality_map, lr_norm

__all__ = [
    "BlockOperator",
    "ObservationSet",
    "RadonGeometry",
    "NormEstimate",
    "partition_rows",
    "build_integral_operator",
    "exact_sparse_signal",
    "build_radon_operator",
    "sparse_disk_phantom",
    "boyd_operator_norm",
    "max_block_norm",
    "save_matrix_csv",
    "load_matrix_csv",
]


@dataclass
class BlockOperator:
    """A forward operator stored as an ordered list of dense row blocks.

    Stacking the blocks reconstructs the full matrix; ``row_maps[i]`` records
    which rows of the original matrix block i holds, so the original row
    order can be recovered after an interleaved partition.
    """

    blocks: list
    output_space: SpaceDescriptor = field(default_factory=SpaceDescriptor.hilbert)
    row_maps: list | None = None

    def __post_init__(self):
        if not self.blocks:
            raise ConfigurationError("operator needs at least one block")
        self.blocks = [np.ascontiguousarray(b, dtype=float) for b in self.blocks]
        n = self.blocks[0].shape[1]
        for i, b in enumerate(self.blocks):
            if b.ndim != 2:
                raise DimensionMismatchError(f"block {i} is not a matrix")
            if b.shape[1] != n:
                raise DimensionMismatchError(
                    f"block {i} has {b.shape[1]} columns, expected {n}"
                )
            if not np.isfinite(b).all():
                raise InvalidInputError(f"block {i} contains non-finite entries")
        if self.row_maps is None:
            offsets = np.cumsum([0] + [b.shape[0] for b in self.blocks])
            self.row_maps = [np.arange(offsets[i], offsets[i + 1]) for i in range(len(self.blocks))]
        self._full = None

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def input_dim(self) -> int:
        return self.blocks[0].shape[1]

    @property
    def total_rows(self) -> int:
        return sum(b.shape[0] for b in self.blocks)

    @property
    def full_matrix(self) -> np.ndarray:
        """Blocks stacked in block order (cached)."""
        if self._full is None:
            self._full = np.vstack(self.blocks)
        return self._full

    def apply(self, i: int, x) -> np.ndarray:
        """A_i x."""
        self._check_index(i)
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise DimensionMismatchError(f"expected input of length {self.input_dim}, got {x.shape}")
        return self.blocks[i] @ x

    def apply_adjoint(self, i: int, ys) -> np.ndarray:
        """A_i^T ys."""
        self._check_index(i)
        ys = np.asarray(ys, dtype=float)
        if ys.shape != (self.blocks[i].shape[0],):
            raise DimensionMismatchError(
                f"expected dual input of length {self.blocks[i].shape[0]}, got {ys.shape}"
            )
        return self.blocks[i].T @ ys

    def apply_all(self, x) -> np.ndarray:
        """Full product A x with rows in block order."""
        return self.full_matrix @ np.asarray(x, dtype=float)

    def _check_index(self, i: int):
        if not 0 <= i < self.n_blocks:
            raise IndexError(f"block index {i} out of range [0, {self.n_blocks})")


@dataclass
class ObservationSet:
    """Per-block data vectors plus the noise level of the whole data set."""

    blocks: list
    noise_level: float = 0.0

    def __post_init__(self):
        self.blocks = [np.asarray(b, dtype=float).ravel() for b in self.blocks]
        if self.noise_level < 0:
            raise ConfigurationError("noise level must be >= 0")

    @classmethod
    def from_full(cls, y_full, op: BlockOperator, noise_level: float = 0.0) -> "ObservationSet":
        """Split a full data vector with the same row selection as the operator."""
        y = np.asarray(y_full, dtype=float).ravel()
        if y.size != op.total_rows:
            raise DimensionMismatchError(f"data length {y.size} != operator rows {op.total_rows}")
        return cls([y[idx] for idx in op.row_maps], noise_level)

    @property
    def concatenated(self) -> np.ndarray:
        return np.concatenate(self.blocks)


def partition_rows(full, n_batches: int, output_space: SpaceDescriptor | None = None) -> BlockOperator:
    """Split a matrix into n_batches interleaved blocks.

    Block j takes rows j, j + n_batches, j + 2 n_batches, ...  This yields
    equisized, well balanced blocks; n_batches must divide the row count.
    """
    A = np.asarray(full, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatchError("expected a matrix")
    n_rows = A.shape[0]
    if n_batches < 1 or n_rows % n_batches != 0:
        raise ConfigurationError(
            f"number of batches ({n_batches}) must divide the row count ({n_rows})"
        )
    maps = [np.arange(j, n_rows, n_batches) for j in range(n_batches)]
    blocks = [A[idx] for idx in maps]
    if output_space is None:
        output_space = SpaceDescriptor.hilbert()
    return BlockOperator(blocks, output_space, maps)


def integral_kernel(t, s):
    """40 t (1 - s) for t <= s, else 40 s (1 - t); symmetric and >= 0 on [0,1]^2."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    return np.where(t <= s, 40.0 * t * (1.0 - s), 40.0 * s * (1.0 - t))


def build_integral_operator(n: int, midpoint_columns: bool = True) -> np.ndarray:
    """Quadrature discretisation of the integral operator on (0, 1).

    Entry (j, k) is kernel(t_j, s_k) / n with t_j = j/n (j = 0..n-1).  By
    default the column nodes are the subinterval midpoints s_k = (2k+1)/(2n);
    with midpoint_columns=False the nodes are (2k+1)/n, which run outside the
    interval and are kept only for comparison runs.
    """
    if n < 2:
        raise ConfigurationError(f"discretisation size must be >= 2, got {n}")
    t = np.arange(n, dtype=float) / n
    if midpoint_columns:
        s = (2.0 * np.arange(n) + 1.0) / (2.0 * n)
    else:
        s = (2.0 * np.arange(n) + 1.0) / n
    return integral_kernel(t[:, None], s[None, :]) / n


def exact_sparse_signal(n: int) -> np.ndarray:
    """Piecewise-constant sparse signal sampled at the midpoints (2j+1)/(2n).

    Value 1 on [9/40, 11/40] and [29/40, 31/40], value 2 on [19/40, 21/40],
    zero elsewhere.
    """
    if n < 40:
        raise ConfigurationError(f"need n >= 40 to resolve the signal plateaus, got {n}")
    s = (2.0 * np.arange(n) + 1.0) / (2.0 * n)
    x = np.zeros(n)
    x[(s >= 9 / 40) & (s <= 11 / 40)] = 1.0
    x[(s >= 29 / 40) & (s <= 31 / 40)] = 1.0
    x[(s >= 19 / 40) & (s <= 21 / 40)] = 2.0
    return x


@dataclass(frozen=True)
class RadonGeometry:
    """2-D parallel-beam acquisition geometry.

    Angles are a * angle_step degrees for a = 0..n_angles-1; the detector
    array is centred and spans the circumscribed circle of the pixel grid.
    """

    grid_side: int
    n_angles: int
    angle_step: float
    n_detectors: int
    pixel_size: float

    def __post_init__(self):
        if self.grid_side < 1 or self.n_angles < 1 or self.n_detectors < 1:
            raise ConfigurationError("grid_side, n_angles and n_detectors must be >= 1")
        if self.pixel_size <= 0:
            raise ConfigurationError("pixel_size must be positive")
        if self.angle_step <= 0:
            raise ConfigurationError("angle_step must be positive")
        if self.n_angles * self.angle_step > 180.0 + 1e-9:
            raise ConfigurationError(
                f"angle coverage {self.n_angles * self.angle_step} deg exceeds 180 deg"
            )

    @property
    def detector_spacing(self) -> float:
        return self.grid_side * self.pixel_size * math.sqrt(2.0) / self.n_detectors

    def detector_offsets(self) -> np.ndarray:
        d = np.arange(self.n_detectors, dtype=float)
        return (d - (self.n_detectors - 1) / 2.0) * self.detector_spacing

    def angles_deg(self) -> np.ndarray:
        return np.arange(self.n_angles, dtype=float) * self.angle_step


def radon_ray_row(geom: RadonGeometry, angle_deg: float, offset: float) -> np.ndarray:
    """Intersection lengths of one ray with every pixel of the grid.

    The ray is the line {x : x . n = offset} with normal
    n = (cos angle, sin angle); pixel (i, j) covers the square centred at
    x = (j + 0.5 - g/2) h, y = (g/2 - i - 0.5) h and the result is indexed
    row-major.  Rays that miss the grid give a zero row.
    """
    g = geom.grid_side
    h = geom.pixel_size
    half = g * h / 2.0
    edges = -half + h * np.arange(g + 1)
    theta = math.radians(angle_deg)
    nx, ny = math.cos(theta), math.sin(theta)
    row = _trace_ray(offset * nx, offset * ny, -ny, nx, edges, h, half, g)
    return np.zeros(g * g) if row is None else row


def build_radon_operator(geom: RadonGeometry) -> np.ndarray:
    """Dense parallel-beam projector: exact ray/pixel intersection lengths.

    Row (a * n_detectors + d) holds, for each pixel, the length of the
    intersection of ray (angle a, detector d) with that pixel.  Rays that
    miss the grid give zero rows, so the sinogram shape is always
    n_angles x n_detectors.
    """
    offsets = geom.detector_offsets()
    A = np.zeros((geom.n_angles * geom.n_detectors, geom.grid_side ** 2))
    for a, theta_deg in enumerate(geom.angles_deg()):
        for d, t in enumerate(offsets):
            A[a * geom.n_detectors + d] = radon_ray_row(geom, theta_deg, t)
    return A


def _trace_ray(px, py, dx, dy, edges, h, half, g):
    """Siddon-style traversal: one ray through the square grid, or None if it misses."""
    # Clip the line p + s*d to the bounding box.
    s_min, s_max = -np.inf, np.inf
    for p0, d0 in ((px, dx), (py, dy)):
        if abs(d0) < 1e-15:
            if abs(p0) > half:
                return None
        else:
            s1 = (-half - p0) / d0
            s2 = (half - p0) / d0
            s_min = max(s_min, min(s1, s2))
            s_max = min(s_max, max(s1, s2))
    if not (s_max > s_min):
        return None
    # Parameters of all crossings of pixel edge lines inside the clip window.
    params = [np.array([s_min, s_max])]
    if abs(dx) > 1e-15:
        sx = (edges - px) / dx
        params.append(sx[(sx > s_min) & (sx < s_max)])
    if abs(dy) > 1e-15:
        sy = (edges - py) / dy
        params.append(sy[(sy > s_min) & (sy < s_max)])
    s = np.unique(np.concatenate(params))
    if s.size < 2:
        return None
    mids = 0.5 * (s[:-1] + s[1:])
    lengths = np.diff(s)
    xm = px + mids * dx
    ym = py + mids * dy
    cols = np.floor((xm + half) / h).astype(int)
    rows = np.floor((half - ym) / h).astype(int)
    keep = (cols >= 0) & (cols < g) & (rows >= 0) & (rows < g) & (lengths > 0)
    out = np.zeros(g * g)
    np.add.at(out, rows[keep] * g + cols[keep], lengths[keep])
    return out


# Disk phantom layout: (centre_x, centre_y, radius, intensity) in unit-square
# coordinates.  Disks are pairwise disjoint and cover < 8% of the area.
_PHANTOM_DISKS = (
    (0.30, 0.35, 0.08, 1.0),
    (0.62, 0.30, 0.10, 2.0),
    (0.45, 0.70, 0.07, 1.0),
    (0.72, 0.68, 0.05, 2.0),
)


def sparse_disk_phantom(grid_side: int) -> np.ndarray:
    """Deterministic image of a few disjoint constant disks on a zero background.

    Returned as a flat vector of length grid_side**2 (row-major).
    """
    if grid_side < 16:
        raise ConfigurationError(f"grid_side must be >= 16, got {grid_side}")
    g = grid_side
    centres = (np.arange(g) + 0.5) / g
    xg, yg = np.meshgrid(centres, centres)  # yg varies along rows
    img = np.zeros((g, g))
    for cx, cy, rad, val in _PHANTOM_DISKS:
        inside = (xg - cx) ** 2 + (yg - cy) ** 2 <= rad ** 2
        img[inside] = val
    return img.ravel()


@dataclass(frozen=True)
class NormEstimate:
    """Result of a power-method norm estimation (always a lower bound)."""

    value: float
    converged: bool
    iterations: int
    history: tuple = ()

    def __float__(self) -> float:
        return self.value


def boyd_operator_norm(
    A,
    rx: float = 2.0,
    ry: float = 2.0,
    tol: float = 1e-10,
    max_iter: int = 2000,
    seed: int = 0,
    restarts: int = 8,
) -> NormEstimate:
    """Estimate ||A||_{l^rx -> l^ry} by Boyd's power method.

    Iterates x <- J_dual(A^T J_ry(A x)), normalised to unit l^rx norm, where
    J_ry is the duality map of l^ry with power ry and J_dual the duality map
    of the dual space l^(rx*) with power rx*.  For rx = ry = 2 this is the
    classical power method on A^T A.  The Rayleigh-type estimate ||A x||_ry
    is non-decreasing within a start and converges to the norm from below.

    The first start is a strictly positive seeded random vector; for
    sign-indefinite matrices the fixed point need not be global, so further
    seeded sign-random starts are run and the largest estimate kept.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatchError("expected a matrix")
    if not (1.0 < rx < math.inf and 1.0 < ry < math.inf):
        raise ConfigurationError("exponents must lie in (1, inf)")
    if restarts < 1:
        raise ConfigurationError("need at least one start")
    if not A.any():
        return NormEstimate(0.0, True, 0)
    rng = np.random.Generator(np.random.Philox(key=seed))
    best = None
    for s in range(restarts):
        x0 = rng.random(A.shape[1]) + 0.1
        if s > 0:
            x0 *= rng.choice([-1.0, 1.0], size=A.shape[1])
        cand = _boyd_single_start(A, rx, ry, tol, max_iter, x0)
        if best is None or cand.value > best.value:
            best = cand
    return best


def _boyd_single_start(A, rx, ry, tol, max_iter, x0) -> NormEstimate:
    y_desc = SpaceDescriptor(ry, ry)
    rx_conj = rx / (rx - 1.0)
    dual_desc = SpaceDescriptor(rx_conj, rx_conj)
    x = x0 / lr_norm(x0, rx)
    prev = -math.inf
    history = []
    estimate = 0.0
    for it in range(1, max_iter + 1):
        y = A @ x
        estimate = lr_norm(y, ry)
        history.append(estimate)
        if estimate == 0.0:
            return NormEstimate(0.0, True, it, tuple(history))
        z = A.T @ duality_map(y, y_desc)
        xn = duality_map(z, dual_desc)
        nxn = lr_norm(xn, rx)
        if nxn == 0.0:
            return NormEstimate(estimate, True, it, tuple(history))
        x = xn / nxn
        if abs(estimate - prev) < tol:
            return NormEstimate(estimate, True, it, tuple(history))
        prev = estimate
    return NormEstimate(estimate, False, max_iter, tuple(history))


def max_block_norm(op: BlockOperator, rx: float, ry: float | None = None, **kwargs) -> float:
    """max_i ||A_i||_{l^rx -> l^ry}; ry defaults to the operator's output exponent."""
    if ry is None:
        ry = op.output_space.r
    return max(boyd_operator_norm(b, rx, ry, **kwargs).value for b in op.blocks)


def save_matrix_csv(path, M):
    """Row-major CSV, one matrix row per line, '.' decimal separator."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", encoding="ascii") as f:
        for row in M:
            f.write(",".join(format(v, ".17g") for v in row))
            f.write("\n")


def load_matrix_csv(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as f:
        rows = []
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise InvalidInputError(f"line {line_no}: {exc}") from exc
    if not rows:
        raise InvalidInputError(f"{path}: empty matrix")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidInputError(f"{path}: ragged rows")
    return np.asarray(rows, dtype=float)
