"""Reading datasets and rendering report tables."""

from dataclasses import dataclass
from pathlib import Path
from warnings import warn

import numpy as np
import pandas as pd

from .core import SeriesData
from .exceptions import InputFileError, ValidationError
from .forecast import harmonic_covariates


def _stars(t):
    """Significance decoration from a z statistic (10%, 5%, 1% two-sided)."""
    try:
        count = int((np.abs(t) > 1.65) + (np.abs(t) > 1.96) + (np.abs(t) > 2.577))
    except TypeError:
        return ""
    return "^{" + "*" * count + "}" if count else ""


def df_to_orgtbl(df, sedf=None, tdf=None, float_fmt="%.6g", math_delimiters=False, print_heading=True):
    """
    Return a string that renders *df* as an org-table.

    If sedf is supplied, standard errors are printed in parentheses below the
    point estimates.  Stars decorate significant estimates, using tdf if it
    is a frame of z statistics, df / sedf if tdf is None, and nothing if tdf
    is False.  Missing entries render as ``---``.
    """
    if len(df.shape) == 1:
        df = pd.DataFrame(df)

    if df.index.duplicated().sum() > 0:
        warn("Dataframe index contains duplicates.")
    if df.columns.duplicated().sum() > 0:
        warn("Dataframe columns contain duplicates.")

    def format_entry(x, stars="", se=False):
        if pd.isna(x):
            return "| --- "
        try:
            fmt = float_fmt + stars
            if se:
                fmt = f"({fmt})"
            if math_delimiters:
                fmt = "\\(" + fmt + "\\)"
            return "| " + fmt % x + " "
        except TypeError:
            return "| %s " % str(x)

    s = ""
    if print_heading:
        name = df.index.name if df.index.name is not None else ""
        if isinstance(df.columns, pd.MultiIndex):
            heads = np.array(df.columns.tolist(), dtype=object).T
            for k, row in enumerate(heads):
                last = None
                cells = []
                for cell in row:
                    cells.append("" if cell == last and k < len(heads) - 1 else str(cell))
                    last = cell
                s += "| " + (name if k == len(heads) - 1 else "") + " | " + " | ".join(cells) + "  |\n"
        else:
            s += "| " + name + " | " + " | ".join(str(c) for c in df.columns) + "  |\n"
        s += "|-\n"

    if sedf is not None and tdf is None:
        tdf = df[sedf.columns] / sedf

    for i in df.index:
        s += "| %s  " % (i,)
        for j in df.columns:
            stars = ""
            if tdf is not None and tdf is not False and j in tdf.columns:
                stars = _stars(tdf[j][i])
            s += format_entry(df[j][i], stars)
        s += "|\n"
        if sedf is not None:
            s += "|"
            for j in df.columns:
                if j not in sedf.columns or pd.isna(df[j][i]):
                    s += "  | "
                elif pd.isna(sedf[j][i]):
                    s += "  | (---) "
                else:
                    s += "  " + format_entry(sedf[j][i], se=True)
            s += "|\n"
    return s


def fit_report_table(fit):
    """Org table of estimates with standard errors and stars."""
    frame = fit.summary_frame()
    return df_to_orgtbl(
        frame[["estimate"]],
        sedf=frame[["stderr"]].rename(columns={"stderr": "estimate"}),
        tdf=frame[["z"]].rename(columns={"z": "estimate"}),
    )


@dataclass(frozen=True, eq=False)
class Dataset:
    data: SeriesData
    time: np.ndarray
    covariate_names: tuple = ()

    def future_time(self, h):
        """Times of the next ``h`` observations, assuming unit steps."""
        return self.time[-1] + np.arange(1, h + 1)


def _bad_rows(mask):
    """1-based data-row numbers (header excluded) where ``mask`` holds."""
    return (np.flatnonzero(np.asarray(mask)) + 1).tolist()


def _describe(rows, limit=5):
    shown = ", ".join(str(r) for r in rows[:limit])
    return shown + (f" and {len(rows) - limit} more" if len(rows) > limit else "")


def _numeric(df, column):
    values = pd.to_numeric(df[column], errors="coerce")
    rows = _bad_rows(values.isna() & df[column].notna())
    if rows:
        raise ValidationError(f"Column {column!r} is not numeric on row(s) {_describe(rows)}.", rows=rows)
    return values.to_numpy(dtype=float)


def read_dataset(path, y="y", covariates=(), time=None, harmonics=()):
    """Load and validate a CSV dataset.

    The file must have a header.  ``y`` names the response, ``covariates``
    the covariate columns and ``time`` an optional time-index column (t runs
    1..n otherwise).  ``harmonics`` are ``(kind, period)`` pairs appended as
    covariates evaluated at the time index.  Offending rows are reported by
    data-row number, counting from 1 below the header.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, sep=",", decimal=".", encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputFileError(f"{path}: {exc}") from exc

    wanted = [y, *covariates] + ([time] if time else [])
    absent = [c for c in wanted if c not in df.columns]
    if absent:
        raise ValidationError(f"{path}: missing column(s) {', '.join(absent)}; have {', '.join(df.columns)}.")
    if df.empty:
        raise ValidationError(f"{path}: no data rows.")

    missing = _bad_rows(df[wanted].isna().any(axis=1))
    if missing:
        raise ValidationError(f"{path}: missing values on row(s) {_describe(missing)}.", rows=missing)

    yv = _numeric(df, y)
    outside = _bad_rows(~((yv > 0) & (yv < 1)))
    if outside:
        first = outside[0]
        raise ValidationError(
            f"{path}: {y} must lie strictly inside (0,1); {y} = {yv[first - 1]:g} on row {first}"
            + (f" (offending rows: {_describe(outside)})" if len(outside) > 1 else "")
            + ".",
            rows=outside,
        )

    if time:
        t = _numeric(df, time)
        if np.any(np.diff(t) <= 0):
            rows = (np.flatnonzero(np.diff(t) <= 0) + 2).tolist()
            raise ValidationError(f"{path}: time column must increase; see row(s) {_describe(rows)}.", rows=rows)
    else:
        t = np.arange(1.0, len(df) + 1)

    columns = [_numeric(df, c) for c in covariates]
    x = np.column_stack(columns) if columns else np.zeros((len(df), 0))
    if harmonics:
        x = np.column_stack([x, harmonic_covariates(t, harmonics)])
    names = tuple(covariates) + tuple(f"{kind}_{period:g}" for kind, period in harmonics)
    return Dataset(SeriesData(yv, x), t, names)


def write_dataset(path, data, time=None, names=None):
    """Write a series as CSV with columns t, y and one per covariate."""
    names = names or [f"x{i}" for i in range(1, data.r + 1)]
    frame = pd.DataFrame({"t": np.arange(1, data.n + 1) if time is None else time, "y": data.y})
    for name, column in zip(names, data.x.T):
        frame[name] = column
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return frame
