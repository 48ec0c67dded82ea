"""Domain types, sufficient statistics, and exact likelihood evaluation.

The model: points follow a spatial Poisson process on a rectangular region
partitioned into equal grid boxes.  The intensity at a location s in box i is

    lambda(s) = lambda0[z_i] * exp(X_i' beta)

with a piecewise-constant baseline lambda0 indexed by the component labels z
and piecewise-constant covariates X.  Everything downstream (sampler,
summaries, criteria) works with the per-box sufficient statistics built here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Region:
    """Rectangular study region [x_min, x_max] x [y_min, y_max]."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate region: [{self.x_min}, {self.x_max}] x "
                f"[{self.y_min}, {self.y_max}]"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, x, y):
        """Vectorized membership test (closed region)."""
        x = np.asarray(x)
        y = np.asarray(y)
        return (
            (x >= self.x_min)
            & (x <= self.x_max)
            & (y >= self.y_min)
            & (y <= self.y_max)
        )


@dataclass(frozen=True)
class GridPartition:
    """Partition of a region into nx * ny equal rectangular boxes.

    Boxes are indexed 0..n-1 in row-major order: box i covers cell
    (ix, iy) with i = iy * nx + ix, ix counting along the x axis.
    ``area_scale`` multiplies the physical box area everywhere it enters the
    model; pass ``unit_area=True`` to rescale so every box has nominal area 1
    (better conditioned gamma posteriors when physical boxes are large).
    """

    region: Region
    nx: int
    ny: int
    area_scale: float = 1.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"need nx, ny >= 1, got ({self.nx}, {self.ny})")
        if not self.area_scale > 0:
            raise ValueError(f"area_scale must be > 0, got {self.area_scale}")

    @classmethod
    def make(cls, region: Region, nx: int, ny: int, unit_area: bool = False):
        physical = region.area / (nx * ny)
        return cls(region, nx, ny, area_scale=1.0 / physical if unit_area else 1.0)

    @property
    def n(self) -> int:
        return self.nx * self.ny

    @property
    def dx(self) -> float:
        return (self.region.x_max - self.region.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.region.y_max - self.region.y_min) / self.ny

    @property
    def box_area(self) -> float:
        """Nominal area mu(A_i), identical for every box."""
        return self.dx * self.dy * self.area_scale

    def box_index(self, x, y) -> np.ndarray:
        """Flat 0-based box index for in-region coordinates.

        Boxes are left/bottom closed; the right/top region edges fold into the
        last box so the partition covers the region exactly.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ix = np.floor((x - self.region.x_min) / self.dx).astype(np.int64)
        iy = np.floor((y - self.region.y_min) / self.dy).astype(np.int64)
        ix = np.clip(ix, 0, self.nx - 1)
        iy = np.clip(iy, 0, self.ny - 1)
        return iy * self.nx + ix

    def box_centers(self) -> np.ndarray:
        """(n, 2) array of box center coordinates in row-major box order."""
        cx = self.region.x_min + (np.arange(self.nx) + 0.5) * self.dx
        cy = self.region.y_min + (np.arange(self.ny) + 0.5) * self.dy
        xx, yy = np.meshgrid(cx, cy)
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class PointPattern:
    """Observed event locations, shape (N, 2)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def check_in_region(self, region: Region) -> None:
        inside = region.contains(self.points[:, 0], self.points[:, 1])
        if not inside.all():
            bad = np.flatnonzero(~inside)
            raise ValueError(
                f"{bad.size} point(s) outside region, indices {bad[:10].tolist()}"
                + ("..." if bad.size > 10 else "")
            )


@dataclass(frozen=True)
class CovariateField:
    """Piecewise-constant covariates on a raster grid.

    ``values[c, j]`` is covariate j on raster cell c (row-major cell order of
    ``grid``).  The raster must coincide with the model partition or refine it
    by integer factors along both axes; anything else is rejected when the
    field is matched against a partition.
    """

    grid: GridPartition
    values: np.ndarray
    standardized: bool = False
    names: tuple = ()

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != self.grid.n:
            raise ValueError(
                f"values must be ({self.grid.n}, p), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("covariate values must be finite")
        object.__setattr__(self, "values", vals)
        if self.names and len(self.names) != vals.shape[1]:
            raise ValueError("names length must match number of covariates")
        if not self.names:
            object.__setattr__(
                self, "names", tuple(f"x{j + 1}" for j in range(vals.shape[1]))
            )

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def standardize(self) -> "CovariateField":
        """Return a copy with each column scaled to sample mean 0, variance 1.

        Standardizing an already-standardized field is a numerical no-op.
        """
        mu = self.values.mean(axis=0)
        sd = self.values.std(axis=0, ddof=1)
        if np.any(sd == 0):
            bad = [self.names[j] for j in np.flatnonzero(sd == 0)]
            raise ValueError(f"cannot standardize zero-variance column(s): {bad}")
        return replace(self, values=(self.values - mu) / sd, standardized=True)


@dataclass(frozen=True)
class Hyperparams:
    """Prior and proposal settings.

    a, b        gamma shape/rate prior for each baseline component
    alpha, r    concentration and power of the partition prior on z
    v_spike, v_slab, pi_gamma
                spike/slab normal variances and the slab prior rate
    proposal_sd initial random-walk step for the beta updates
    """

    a: float = 1.0
    b: float = 1.0
    alpha: float = 1.0
    r: float = 1.0
    v_spike: float = 0.01
    v_slab: float = 100.0
    pi_gamma: float = 0.5
    proposal_sd: float = 0.05

    def __post_init__(self):
        if min(self.a, self.b, self.alpha, self.v_spike, self.v_slab) <= 0:
            raise ValueError("a, b, alpha, v_spike, v_slab must be > 0")
        if self.r < 1:
            raise ValueError(f"power r must be >= 1, got {self.r}")
        if not self.v_spike < self.v_slab:
            raise ValueError("need v_spike < v_slab")
        if not 0 < self.pi_gamma < 1:
            raise ValueError("pi_gamma must be in (0, 1)")
        if not self.proposal_sd > 0:
            raise ValueError("proposal_sd must be > 0")

    def with_r(self, r: float) -> "Hyperparams":
        return replace(self, r=r)


@dataclass
class ModelState:
    """One parameter draw: labels z (values 1..K), baselines, beta, gamma."""

    z: np.ndarray        # (n,) int64, values in 1..K
    lambda0: np.ndarray  # (K,) float64, > 0
    beta: np.ndarray     # (p,) float64
    gamma: np.ndarray    # (p,) int8, 0/1

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.int64)
        self.lambda0 = np.asarray(self.lambda0, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=np.int8)

    @property
    def K(self) -> int:
        return self.lambda0.shape[0]

    def validate(self) -> None:
        labels = np.unique(self.z)
        if not np.array_equal(labels, np.arange(1, self.K + 1)):
            raise ValueError(
                f"labels must be exactly 1..K={self.K}, got {labels.tolist()}"
            )
        if not np.all(self.lambda0 > 0):
            raise ValueError("all baseline values must be > 0")
        if self.beta.shape != self.gamma.shape:
            raise ValueError("beta and gamma must have equal length")

    def copy(self) -> "ModelState":
        return ModelState(
            self.z.copy(), self.lambda0.copy(), self.beta.copy(), self.gamma.copy()
        )

    def baseline_per_box(self) -> np.ndarray:
        """lambda0 evaluated at each box, shape (n,)."""
        return self.lambda0[self.z - 1]


@dataclass
class SufficientStats:
    """Per-box counts and cached integrated intensities for one state.

    m                   per-box point counts, sum(m) = N
    m_cell              per-raster-cell counts (== m on an aligned raster)
    N_per_component     points per component under the current z
    boxes_per_component boxes per component under the current z
    LambdaI             cached Lambda_i(beta), the integrated covariate
                        effect over box i
    """

    m: np.ndarray
    m_cell: np.ndarray
    N_per_component: np.ndarray
    boxes_per_component: np.ndarray
    LambdaI: np.ndarray

    def refresh_components(self, state: ModelState) -> None:
        self.N_per_component = np.bincount(
            state.z - 1, weights=self.m, minlength=state.K
        ).astype(np.int64)
        self.boxes_per_component = np.bincount(state.z - 1, minlength=state.K).astype(
            np.int64
        )


@dataclass(frozen=True)
class FitData:
    """Immutable per-dataset arrays shared by the sampler and criteria.

    Cells are the covariate raster cells (identical to boxes when the raster
    is aligned).  ``cell_box[c]`` maps cell c to its containing box, and cells
    are stored grouped by box.
    """

    grid: GridPartition
    pattern: PointPattern
    covariates: CovariateField | None
    m: np.ndarray          # (n,) int64 per-box counts
    m_cell: np.ndarray     # (n_cells,) int64 per-cell counts
    X_cell: np.ndarray     # (n_cells, p) float64
    cell_area: np.ndarray  # (n_cells,) float64, scaled areas
    cell_box: np.ndarray   # (n_cells,) int64

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def p(self) -> int:
        return self.X_cell.shape[1]

    @property
    def n_points(self) -> int:
        return int(self.m.sum())

    def lambda_boxes(self, beta: np.ndarray) -> np.ndarray:
        """Lambda_i(beta) for every box i, shape (n,)."""
        e = self.cell_area * np.exp(self.X_cell @ np.asarray(beta, dtype=float))
        return np.bincount(self.cell_box, weights=e, minlength=self.n)


def assign_points(pattern: PointPattern, grid: GridPartition):
    """Map each point to its box; returns (per-point index, per-box counts).

    Raises ValueError naming the offending point indices if any point falls
    outside the region.
    """
    pattern.check_in_region(grid.region)
    if pattern.n_points == 0:
        return (
            np.empty(0, dtype=np.int64),
            np.zeros(grid.n, dtype=np.int64),
        )
    idx = grid.box_index(pattern.points[:, 0], pattern.points[:, 1])
    m = np.bincount(idx, minlength=grid.n).astype(np.int64)
    return idx, m


def _raster_order(grid: GridPartition, rg: GridPartition):
    """Box index of each raster cell and the stable by-box cell ordering."""
    same_region = np.allclose(
        [rg.region.x_min, rg.region.x_max, rg.region.y_min, rg.region.y_max],
        [
            grid.region.x_min,
            grid.region.x_max,
            grid.region.y_min,
            grid.region.y_max,
        ],
    )
    if not same_region:
        raise ConfigurationError("covariate raster region differs from partition region")
    if rg.nx % grid.nx or rg.ny % grid.ny:
        raise ConfigurationError(
            f"covariate raster ({rg.nx}x{rg.ny}) must equal the partition "
            f"({grid.nx}x{grid.ny}) or refine it by integer factors"
        )
    fx, fy = rg.nx // grid.nx, rg.ny // grid.ny
    cell_ix, cell_iy = np.meshgrid(np.arange(rg.nx), np.arange(rg.ny))
    box_of_cell = (cell_iy.ravel() // fy) * grid.nx + (cell_ix.ravel() // fx)
    order = np.argsort(box_of_cell, kind="stable")
    return box_of_cell[order].astype(np.int64), order


def match_raster(grid: GridPartition, covariates: CovariateField | None):
    """Cell-level arrays (cell_area, X_cell, cell_box) for a partition.

    The covariate raster must equal the partition or refine it by integer
    factors; a coarser or misaligned raster raises ConfigurationError.  With
    no covariates the cells are the boxes themselves and p = 0.
    """
    n = grid.n
    if covariates is None:
        return (
            np.full(n, grid.box_area),
            np.zeros((n, 0)),
            np.arange(n, dtype=np.int64),
        )
    rg = covariates.grid
    cell_box, order = _raster_order(grid, rg)
    # cell areas rescale with the partition's convention, not the raster's
    cell_area = np.full(rg.n, rg.dx * rg.dy * grid.area_scale)
    return (
        cell_area,
        np.ascontiguousarray(covariates.values[order]),
        cell_box,
    )


def prepare_fit_data(
    pattern: PointPattern,
    grid: GridPartition,
    covariates: CovariateField | None = None,
) -> FitData:
    """Bundle counts and cell arrays for one dataset."""
    _, m = assign_points(pattern, grid)
    cell_area, X_cell, cell_box = match_raster(grid, covariates)
    if covariates is None or covariates.grid.n == grid.n:
        m_cell = m.copy()
    else:
        rg = covariates.grid
        cov_idx = (
            rg.box_index(pattern.points[:, 0], pattern.points[:, 1])
            if pattern.n_points
            else np.empty(0, dtype=np.int64)
        )
        m_raw = np.bincount(cov_idx, minlength=rg.n).astype(np.int64)
        _, order = _raster_order(grid, rg)
        m_cell = m_raw[order]
    return FitData(
        grid=grid,
        pattern=pattern,
        covariates=covariates,
        m=m,
        m_cell=m_cell,
        X_cell=X_cell,
        cell_area=cell_area,
        cell_box=cell_box,
    )


def integrated_intensity(
    grid: GridPartition,
    covariates: CovariateField | None,
    beta: np.ndarray,
    i: int | None = None,
):
    """Lambda_i(beta) = integral over box i of exp(X(s)' beta) ds.

    For an aligned raster this is mu(A_i) * exp(X_i' beta); for an integer
    refinement it is the cell-area-weighted sum of exponentials over the
    cells inside box i.  With i=None the full length-n vector is returned.
    """
    cell_area, X_cell, cell_box = match_raster(grid, covariates)
    e = cell_area * np.exp(X_cell @ np.asarray(beta, dtype=float))
    lam = np.bincount(cell_box, weights=e, minlength=grid.n)
    return lam if i is None else float(lam[i])


def log_likelihood(
    state: ModelState,
    stats: SufficientStats,
    grid: GridPartition | None = None,
    covariates: CovariateField | None = None,
    X_cell: np.ndarray | None = None,
) -> float:
    """Log-likelihood of the point pattern at ``state``.

    Multiplicative terms not involving the parameters are dropped:
    the value is  sum_i [ m_i log lambda0_{z_i} - lambda0_{z_i} Lambda_i ]
    plus the per-cell point term  sum_c m_cell_c X_c' beta.
    """
    if np.any(state.lambda0 <= 0):
        raise ValueError("baseline values must be > 0")
    lam_box = state.baseline_per_box()
    if X_cell is None:
        if covariates is not None:
            _, X_cell, _ = match_raster(grid, covariates)
        else:
            X_cell = np.zeros((stats.m.shape[0], 0))
    point_term = float(stats.m_cell @ (X_cell @ state.beta))
    with np.errstate(divide="ignore", invalid="ignore"):
        count_term = float(np.sum(stats.m * np.log(lam_box)))
    return point_term + count_term - float(lam_box @ stats.LambdaI)


def sufficient_stats(
    data: FitData,
    state: ModelState,
) -> SufficientStats:
    """Build sufficient statistics for ``state`` on prepared data."""
    stats = SufficientStats(
        m=data.m,
        m_cell=data.m_cell,
        N_per_component=np.zeros(state.K, dtype=np.int64),
        boxes_per_component=np.zeros(state.K, dtype=np.int64),
        LambdaI=data.lambda_boxes(state.beta),
    )
    stats.refresh_components(state)
    return stats
