"""CSV/JSON ingestion and export.

All tabular artifacts are plain CSV so downstream plotting needs nothing
beyond a spreadsheet; one JSON file records the configuration, seed, and
acceptance bookkeeping needed to replay a run.  Box coordinates in files are
1-based (column ``box_ix`` in 1..nx, ``box_iy`` in 1..ny).
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .model import CovariateField, GridPartition, PointPattern, Region
from .postproc import PosteriorSummary, baseline_percentiles
from .sampler import ChainSample


def load_points(path, region: Region | None = None) -> PointPattern:
    """Read a point pattern from a CSV file with header ``x,y``.

    Malformed rows are reported with their line number.  When a region is
    given, out-of-region points are rejected with their indices.
    """
    path = Path(path)
    xs = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file")
        cols = [h.strip().lower() for h in header]
        if cols[:2] != ["x", "y"]:
            raise DataFormatError(f"{path}: expected header 'x,y', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise DataFormatError(f"{path}:{lineno}: expected two fields, got {row}")
            try:
                xs.append((float(row[0]), float(row[1])))
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric coordinates {row[:2]}")
    pattern = PointPattern(np.array(xs, dtype=float).reshape(-1, 2))
    if region is not None:
        try:
            pattern.check_in_region(region)
        except ValueError as exc:
            raise DataFormatError(f"{path}: {exc}")
    return pattern


def load_covariates(path, grid: GridPartition, standardize: bool = False) -> CovariateField:
    """Read box covariates keyed by (box_ix, box_iy), one row per box.

    Header must be ``box_ix,box_iy,<name1>,...,<namep>``.  Row order does not
    matter; missing or duplicate boxes and non-numeric cells are errors.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file")
        cols = [h.strip() for h in header]
        if [c.lower() for c in cols[:2]] != ["box_ix", "box_iy"]:
            raise DataFormatError(
                f"{path}: expected header 'box_ix,box_iy,<names...>', got {header}"
            )
        names = tuple(cols[2:])
        if not names:
            raise DataFormatError(f"{path}: no covariate columns")
        values = np.full((grid.n, len(names)), np.nan)
        seen = np.zeros(grid.n, dtype=bool)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(cols):
                raise DataFormatError(
                    f"{path}:{lineno}: expected {len(cols)} fields, got {len(row)}"
                )
            try:
                ix = int(row[0])
                iy = int(row[1])
                vals = [float(v) for v in row[2:]]
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric cell in {row}")
            if not (1 <= ix <= grid.nx and 1 <= iy <= grid.ny):
                raise DataFormatError(
                    f"{path}:{lineno}: box ({ix},{iy}) outside {grid.nx}x{grid.ny} grid"
                )
            flat = (iy - 1) * grid.nx + (ix - 1)
            if seen[flat]:
                raise DataFormatError(f"{path}:{lineno}: duplicate box ({ix},{iy})")
            seen[flat] = True
            values[flat] = vals
    if not seen.all():
        missing = np.flatnonzero(~seen)
        coords = [(int(f % grid.nx) + 1, int(f // grid.nx) + 1) for f in missing[:5]]
        raise DataFormatError(
            f"{path}: {missing.size} box(es) missing, first {coords}"
        )
    field = CovariateField(grid=grid, values=values, names=names)
    return field.standardize() if standardize else field


def _write_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _box_coords(grid: GridPartition):
    flat = np.arange(grid.n)
    return flat % grid.nx + 1, flat // grid.nx + 1


def export_results(
    summary: PosteriorSummary,
    chain: ChainSample,
    grid: GridPartition,
    outdir,
    criteria: dict | None = None,
    run_meta: dict | None = None,
    covariate_names=None,
) -> list:
    """Write the fit artifacts; returns the list of paths written.

    Artifacts: summary.csv, zhat.csv, baseline_{q025,q50,q975}.csv,
    trace_K.csv, trace_RI.csv, criteria.csv, run_meta.json.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    p = chain.p
    names = list(covariate_names or (chain.data.covariates.names if chain.data.covariates else []))
    if len(names) != p:
        names = [f"x{j + 1}" for j in range(p)]

    path = outdir / "summary.csv"
    _write_csv(
        path,
        ["covariate", "mean", "sd", "hpd_lower", "hpd_upper", "p_gamma", "selected"],
        [
            [
                names[j],
                f"{summary.beta_mean[j]:.10g}",
                f"{summary.beta_sd[j]:.10g}",
                f"{summary.hpd_intervals[j, 0]:.10g}",
                f"{summary.hpd_intervals[j, 1]:.10g}",
                f"{summary.gamma_prob[j]:.10g}",
                int(summary.selected[j]),
            ]
            for j in range(p)
        ],
    )
    written.append(path)

    bx, by = _box_coords(grid)
    lam_hat_box = summary.lambda0_hat[summary.z_hat - 1]
    path = outdir / "zhat.csv"
    _write_csv(
        path,
        ["box_ix", "box_iy", "z_hat", "lambda0_hat"],
        [
            [int(bx[i]), int(by[i]), int(summary.z_hat[i]), f"{lam_hat_box[i]:.10g}"]
            for i in range(grid.n)
        ],
    )
    written.append(path)

    percentiles = baseline_percentiles(chain)
    for tag, row in zip(("q025", "q50", "q975"), percentiles):
        path = outdir / f"baseline_{tag}.csv"
        _write_csv(
            path,
            ["box_ix", "box_iy", "baseline"],
            [
                [int(bx[i]), int(by[i]), f"{row[i]:.10g}"]
                for i in range(grid.n)
            ],
        )
        written.append(path)

    path = outdir / "trace_K.csv"
    _write_csv(
        path,
        ["draw", "K"],
        [[t, int(k)] for t, k in enumerate(chain.K_trace)],
    )
    written.append(path)

    from .postproc import ri_trace

    trace, _ = ri_trace(chain, summary.z_hat)
    path = outdir / "trace_RI.csv"
    _write_csv(
        path,
        ["draw", "RI"],
        [[t, f"{v:.10g}"] for t, v in enumerate(trace)],
    )
    written.append(path)

    path = outdir / "criteria.csv"
    crit = criteria or {}
    _write_csv(
        path,
        list(crit.keys()),
        [[f"{v:.10g}" if isinstance(v, float) else v for v in crit.values()]],
    )
    written.append(path)

    path = outdir / "run_meta.json"
    meta = dict(run_meta or {})
    meta.setdefault("t_star", int(summary.t_star))
    meta.setdefault("K_mode", int(summary.K_mode))
    meta.setdefault("K_mode_freq", int(summary.K_mode_freq))
    meta.setdefault("K_sd", float(summary.K_sd))
    meta.setdefault("mean_RI", float(summary.mean_RI))
    meta.setdefault("M", int(chain.M))
    meta.setdefault("accept_rate", [float(v) for v in chain.accept_rate])
    meta.setdefault("proposal_sd", [float(v) for v in chain.proposal_sd])
    with path.open("w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written


def export_points(pattern: PointPattern, path) -> None:
    _write_csv(
        path,
        ["x", "y"],
        [[repr(float(x)), repr(float(y))] for x, y in pattern.points],
    )


def export_covariates(field: CovariateField, path) -> None:
    bx, by = _box_coords(field.grid)
    _write_csv(
        path,
        ["box_ix", "box_iy", *field.names],
        [
            [int(bx[i]), int(by[i]), *(repr(float(v)) for v in field.values[i])]
            for i in range(field.grid.n)
        ],
    )


def export_truth(setting, path) -> None:
    grid = setting.grid
    bx, by = _box_coords(grid)
    lam_box = setting.lambda0[setting.z0 - 1]
    _write_csv(
        path,
        ["box_ix", "box_iy", "z_true", "lambda0_true"],
        [
            [int(bx[i]), int(by[i]), int(setting.z0[i]), f"{lam_box[i]:.10g}"]
            for i in range(grid.n)
        ],
    )


def export_study(report, outdir) -> list:
    """Write the replicate-study artifacts; returns the paths written."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    path = outdir / "replicates.csv"
    header = [
        "replicate",
        "r_opt",
        "K_opt",
        "K_r1",
        "mean_RI_opt",
        "mean_RI_r1",
        "mse_model",
        "mse_const",
    ]
    header += [f"beta_mean_{j + 1}" for j in range(report.beta_true.shape[0])]
    header += [f"beta_sd_{j + 1}" for j in range(report.beta_true.shape[0])]
    header += [f"selected_{j + 1}" for j in range(report.beta_true.shape[0])]
    rows = []
    for rep in range(report.R):
        row = [
            rep,
            f"{report.r_opt[rep]:.10g}",
            int(report.K_opt[rep]),
            int(report.K_r1[rep]),
            f"{report.mean_ri_opt[rep]:.10g}",
            f"{report.mean_ri_r1[rep]:.10g}",
            f"{report.mse_model[rep]:.10g}",
            f"{report.mse_const[rep]:.10g}",
        ]
        row += [f"{v:.10g}" for v in report.beta_mean[rep]]
        row += [f"{v:.10g}" for v in report.beta_sd[rep]]
        row += [int(v) for v in report.selected[rep]]
        rows.append(row)
    _write_csv(path, header, rows)
    written.append(path)

    path = outdir / "coefficients.csv"
    acc = report.selection_accuracy()
    bias = report.bias()
    sd = report.empirical_sd()
    sd_hat = report.mean_posterior_sd()
    _write_csv(
        path,
        ["coefficient", "true", "accuracy_pct", "bias", "sd", "sd_hat"],
        [
            [
                f"beta{j + 1}",
                f"{report.beta_true[j]:.10g}",
                f"{100 * acc[j]:.10g}",
                f"{bias[j]:.10g}",
                f"{sd[j]:.10g}",
                f"{sd_hat[j]:.10g}",
            ]
            for j in range(report.beta_true.shape[0])
        ],
    )
    written.append(path)

    path = outdir / "khat_by_r.csv"
    rows = []
    for rep in range(report.R):
        for ri, r in enumerate(report.r_grid):
            rows.append([rep, f"{r:.10g}", int(report.K_by_r[rep, ri])])
    _write_csv(path, ["replicate", "r", "K_hat"], rows)
    written.append(path)

    path = outdir / "ri_trace_mean.csv"
    mean_opt = report.ri_trace_opt.mean(axis=0)
    mean_r1 = report.ri_trace_r1.mean(axis=0)
    _write_csv(
        path,
        ["draw", "mean_RI_r1", "mean_RI_opt"],
        [
            [t, f"{mean_r1[t]:.10g}", f"{mean_opt[t]:.10g}"]
            for t in range(mean_opt.shape[0])
        ],
    )
    written.append(path)
    return written
