"""Return panels: CSV ingestion, price conversion and per-asset statistics.

A panel holds T rows of simple returns in percent units for n assets,
labelled by strictly increasing calendar dates. Missing data is rejected,
never imputed.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .indicators import empirical_quantile, wealth_path

__all__ = [
    "ReturnPanel",
    "AssetStats",
    "prices_to_returns",
    "load_returns",
    "save_returns",
    "descriptive_stats",
    "save_stats",
]


@dataclass(frozen=True)
class ReturnPanel:
    """T x n panel of simple percent returns with date and asset labels."""

    dates: tuple
    assets: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "assets", tuple(str(a) for a in self.assets))
        object.__setattr__(self, "values", values)
        T, n = values.shape if values.ndim == 2 else (0, 0)
        if values.ndim != 2:
            raise DataError("panel values must be a 2-D matrix")
        if len(self.dates) != T:
            raise DataError(f"{len(self.dates)} dates for {T} rows")
        if len(self.assets) != n:
            raise DataError(f"{len(self.assets)} asset names for {n} columns")
        if n < 2:
            raise DataError(f"need at least 2 assets, got {n}")
        if T < 2:
            raise DataError(f"need at least 2 dates, got {T}")
        if len(set(self.assets)) != n:
            raise DataError("duplicate asset names")
        for i in range(1, T):
            if self.dates[i] <= self.dates[i - 1]:
                raise DataError(f"non-monotone dates at row {i} ({self.dates[i]})")
        bad = ~np.isfinite(values)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DataError(
                f"missing value at row {r} ({self.dates[r]}), column '{self.assets[c]}'"
            )
        values.flags.writeable = False

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]

    def window(self, start: int, stop: int) -> "ReturnPanel":
        """Row slice [start, stop) as a new panel."""
        return ReturnPanel(self.dates[start:stop], self.assets, self.values[start:stop])


@dataclass(frozen=True)
class AssetStats:
    """Descriptive statistics for one asset's return series."""

    mean: float
    std_dev: float
    kurtosis: float
    skewness: float
    q10: float
    final_wealth: float


def prices_to_returns(prices: np.ndarray) -> np.ndarray:
    """Simple percent returns from a price matrix: 100 * (p_t / p_{t-1} - 1)."""
    p = np.asarray(prices, dtype=float)
    if (p <= 0).any():
        raise DataError("prices must be strictly positive")
    return 100.0 * (p[1:] / p[:-1] - 1.0)


def _parse_csv(path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from err
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "date":
        raise DataError(f"{path}: header must start with 'date'")
    assets = header[1:]
    if len(assets) < 2:
        raise DataError(f"{path}: fewer than 2 asset columns")
    dates, data = [], []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        try:
            d = dt.date.fromisoformat(row[0].strip())
        except ValueError as err:
            raise DataError(f"{path}: row {i}: bad date '{row[0]}'") from err
        if dates and d <= dates[-1]:
            raise DataError(f"{path}: non-monotone dates at row {i} ({d})")
        vals = []
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if not cell:
                raise DataError(
                    f"{path}: missing value at row {i} ({d}), column '{assets[j]}'"
                )
            try:
                vals.append(float(cell))
            except ValueError as err:
                raise DataError(
                    f"{path}: bad number '{cell}' at row {i}, column '{assets[j]}'"
                ) from err
        dates.append(d)
        data.append(vals)
    return dates, assets, np.array(data, dtype=float)


def load_returns(path, format: str = "returns-csv") -> ReturnPanel:
    """Load a panel from CSV, converting prices to returns when asked.

    ``format`` is 'returns-csv' (values already percent returns) or
    'prices-csv' (positive price levels; the output has one row fewer).
    """
    if format not in ("returns-csv", "prices-csv"):
        raise DataError(f"unknown format '{format}'")
    dates, assets, values = _parse_csv(path)
    if format == "prices-csv":
        if len(dates) < 3:
            raise DataError(f"{path}: need at least 3 price rows")
        values = prices_to_returns(values)
        dates = dates[1:]
    return ReturnPanel(dates, assets, values)


def save_returns(panel: ReturnPanel, path) -> None:
    """Write a panel as returns CSV; floats use shortest round-trip repr."""
    lines = ["date," + ",".join(panel.assets)]
    for d, row in zip(panel.dates, panel.values):
        lines.append(d.isoformat() + "," + ",".join(repr(float(v)) for v in row))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def descriptive_stats(panel: ReturnPanel, initial_wealth: float = 100.0) -> dict:
    """Per-asset stats: mean, std (T-1), moment skew/kurtosis, q10, wealth.

    Kurtosis is non-excess (normal = 3). Returns a dict keyed by asset name
    in panel order.
    """
    out = {}
    for j, asset in enumerate(panel.assets):
        r = panel.values[:, j]
        m2 = ((r - r.mean()) ** 2).mean()
        if m2 > 0:
            skew = float(((r - r.mean()) ** 3).mean() / m2 ** 1.5)
            kurt = float(((r - r.mean()) ** 4).mean() / m2 ** 2)
        else:
            skew = float("nan")
            kurt = float("nan")
        out[asset] = AssetStats(
            mean=float(r.mean()),
            std_dev=float(r.std(ddof=1)),
            kurtosis=kurt,
            skewness=skew,
            q10=empirical_quantile(r, 0.10),
            final_wealth=float(wealth_path(r, initial_wealth)[-1]),
        )
    return out


def save_stats(stats: dict, path) -> None:
    """Write descriptive stats as CSV, one row per asset."""
    cols = ("mean", "std_dev", "kurtosis", "skewness", "q10", "final_wealth")
    lines = ["asset," + ",".join(cols)]
    for asset, s in stats.items():
        lines.append(asset + "," + ",".join(repr(float(getattr(s, c))) for c in cols))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
