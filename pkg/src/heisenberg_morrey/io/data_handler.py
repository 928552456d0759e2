"""NetCDF and CSV data handler for heisenberg-morrey results."""

import csv
from datetime import datetime
from numbers import Integral, Real
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from netCDF4 import Dataset

from .. import __version__

CSV_HEADER = "# heisenberg-morrey csv v1"


def _cell(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        return f"{float(value):.12e}"
    return str(value)


def _prepare(filepath) -> Path:
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


class DataHandler:
    """CSV output for every experiment and NetCDF for the heat-kernel table.

    CSV files start with a versioned header line and carry no timestamps,
    so identical config and seed give byte-identical files.
    """

    @staticmethod
    def save_rows_csv(filepath, columns: Sequence[str], rows: Iterable[Sequence],
                      metadata: Dict = None) -> Path:
        """Write rows under a header; metadata goes into '# key=value' lines."""
        path = _prepare(filepath)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            f.write(CSV_HEADER + "\n")
            for key, value in sorted((metadata or {}).items()):
                f.write(f"# {key}={value}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        return path

    @staticmethod
    def ratio_rows(reports: Dict[str, "RatioReport"]) -> Tuple[List[str], List[list]]:
        """One row per (function, theta') and a summary row per report."""
        extras = sorted({k for r in reports.values() for row in r.rows for k in row.extra})
        notes = sorted({k for r in reports.values() for k in r.notes})
        columns = ["check", "row", "function", "theta_out", "input_norm", "output_norm", "ratio"]
        columns += extras + ["stability", "smallest_stable_theta", "scale_invariance"] + notes
        rows = []
        for name, report in reports.items():
            for row in report.rows:
                rows.append(
                    [name, "function", row.function, row.theta_out, row.input_norm, row.output_norm, row.ratio]
                    + [row.extra.get(k, np.nan) for k in extras]
                    + [np.nan, np.nan, np.nan]
                    + [np.nan] * len(notes)
                )
            for theta, (ratio, drift) in sorted(report.sweep.items()):
                rows.append(
                    [name, "summary", "max", theta, np.nan, np.nan, ratio]
                    + [np.nan] * len(extras)
                    + [drift, report.smallest_stable_theta, report.scale_invariance]
                    + [report.notes.get(k, np.nan) for k in notes]
                )
        return columns, rows

    @staticmethod
    def save_ratio_csv(filepath, reports, metadata: Dict = None) -> Path:
        """RatioReport (or a name -> RatioReport dict) as CSV."""
        if not isinstance(reports, dict):
            reports = {reports.experiment: reports}
        columns, rows = DataHandler.ratio_rows(reports)
        return DataHandler.save_rows_csv(filepath, columns, rows, metadata)

    @staticmethod
    def save_norm_csv(filepath, reports: Sequence[Tuple[str, "NormReport"]],
                      metadata: Dict = None) -> Path:
        columns = ["function", "value", "witness_center", "witness_radius",
                   "balls_tested", "convergence", "growth", "stabilized"]
        rows = []
        for label, report in reports:
            data = report.to_row()
            rows.append([label] + [data[c] for c in columns[1:-1]] + [report.stabilized])
        return DataHandler.save_rows_csv(filepath, columns, rows, metadata)

    @staticmethod
    def save_inequality_csv(filepath, report: "InequalityReport",
                            metadata: Dict = None) -> Path:
        columns = ["check", "checked", "violations", "worst_margin", "passed"]
        rows = [[c.name, c.checked, c.violations, c.worst_margin, c.passed] for c in report.checks]
        if report.comparability is not None:
            rows.append(["fit:C0", 0, 0, report.comparability.C0, True])
            rows.append(["fit:N0", 0, 0, report.comparability.N0, True])
        return DataHandler.save_rows_csv(filepath, columns, rows, metadata)

    @staticmethod
    def save_rho_csv(filepath, rows, metadata: Dict = None) -> Path:
        dim = len(rows[0].point) if rows else 3
        columns = [f"u{i}" for i in range(dim)] + ["rho", "closed_form"]
        data = [list(r.point) + [r.rho, r.closed_form] for r in rows]
        return DataHandler.save_rows_csv(filepath, columns, data, metadata)

    @staticmethod
    def save_volume_csv(filepath, volumes: Dict[str, float], metadata: Dict = None) -> Path:
        return DataHandler.save_rows_csv(
            filepath, ["quantity", "value"], [[k, volumes[k]] for k in volumes], metadata
        )

    @staticmethod
    def save_netcdf(filepath, table: "HeatKernelTable", metadata: Dict = None):
        """Save the H_s table on the (s, |z|, t) grid to a NetCDF file."""
        path = _prepare(filepath)
        metadata = metadata or {}

        with Dataset(path, 'w', format='NETCDF4') as nc:

            # Dimensions
            nc.createDimension('s', len(table.times))
            nc.createDimension('r', len(table.radii))
            nc.createDimension('t', len(table.heights))

            # Coordinates
            nc_s = nc.createVariable('s', 'f8', ('s',), zlib=True, complevel=4)
            nc_s[:] = table.times
            nc_s.units = "1"
            nc_s.long_name = "heat_time"

            nc_r = nc.createVariable('r', 'f8', ('r',), zlib=True, complevel=4)
            nc_r[:] = table.radii
            nc_r.units = "1"
            nc_r.long_name = "horizontal_radius"

            nc_t = nc.createVariable('t', 'f8', ('t',), zlib=True, complevel=4)
            nc_t[:] = table.heights
            nc_t.units = "1"
            nc_t.long_name = "vertical_coordinate"

            # Kernel values
            nc_h = nc.createVariable('heat_kernel', 'f8', ('s', 'r', 't'),
                                     zlib=True, complevel=4)
            nc_h[:] = table.values
            nc_h.long_name = "sub_laplacian_heat_kernel"
            nc_h.description = "H_s(z, t) with |z| = r"

            # Global attributes - diagnostics
            nc.origin_error = float(table.origin_error)
            nc.axis_error = float(np.nan if table.axis_error is None else table.axis_error)
            nc.kernel_mass = float(table.mass)
            for key, value in table.volumes.items():
                setattr(nc, f"volume_{key}", float(value))

            # Metadata
            for key, value in sorted(metadata.items()):
                if isinstance(value, (bool, np.bool_)):
                    value = int(value)
                elif value is None:
                    value = "none"
                elif not isinstance(value, (Real, str)):
                    value = str(value)
                setattr(nc, key, value)
            nc.created = datetime.now().isoformat()
            nc.software = "heisenberg-morrey"
            nc.version = __version__
            nc.Conventions = "CF-1.8"
            nc.title = f"Heisenberg heat kernel: {metadata.get('name', 'heat-kernel')}"

        return path
