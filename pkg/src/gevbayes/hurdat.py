"""HURDAT2 best-track ingestion and annual-maxima extraction.

The HURDAT2 layout is a flat comma-separated text file: each storm has
a header line (storm id, name, number of track rows) followed by that
many rows of 6-hourly observations (date, time, record identifier,
status, latitude, longitude, maximum sustained wind in knots, ...).
Missing winds carry the sentinel -99 and are skipped.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError
from .gev import BlockMaxSample

__all__ = [
    "TrackRecord",
    "HurdatFile",
    "AnnualMaxSeries",
    "KNOTS_TO_KMH",
    "parse_hurdat",
    "annual_maxima",
    "read_annual_series_csv",
    "write_annual_series_csv",
]

KNOTS_TO_KMH = 1.852

_HEADER_ID = re.compile(r"[A-Z]{2}\d{6}")


@dataclass(frozen=True)
class TrackRecord:
    storm_id: str
    storm_name: str
    year: int
    date: str       # YYYYMMDD
    time: str       # HHMM
    status: str
    lat: float
    lon: float
    max_wind: float  # km/h after conversion, knots if conversion disabled


@dataclass(frozen=True)
class HurdatFile:
    records: list[TrackRecord]
    n_storms: int
    missing_wind_count: int


def _parse_latlon(token: str) -> float:
    token = token.strip()
    if not token:
        return math.nan
    hemi = token[-1].upper()
    try:
        value = float(token[:-1] if hemi in "NSEW" else token)
    except ValueError:
        return math.nan
    if hemi in ("S", "W"):
        value = -value
    return value


def parse_hurdat(path: str, winds_in_knots: bool = True) -> HurdatFile:
    """Parse a HURDAT2-format file.

    ``winds_in_knots`` applies the knots -> km/h conversion (factor
    1.852); set it to False when the source already carries km/h.
    Raises ParseError (with the line number) on malformed headers or a
    record-count mismatch; an empty file parses to an empty result.
    """
    records: list[TrackRecord] = []
    n_storms = 0
    missing = 0
    factor = KNOTS_TO_KMH if winds_in_knots else 1.0
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if not _HEADER_ID.fullmatch(fields[0]):
            raise ParseError(f"expected a storm header, got {line[:60]!r}", line=i)
        if len(fields) < 3 or not fields[2].lstrip("-").isdigit():
            raise ParseError(f"malformed header for storm {fields[0]}", line=i)
        storm_id, storm_name, n_rows = fields[0], fields[1], int(fields[2])
        if n_rows < 0 or i + n_rows > len(lines):
            raise ParseError(
                f"storm {storm_id} ({storm_name}) declares {n_rows} records "
                f"but the file ends early", line=i)
        n_storms += 1
        year = int(storm_id[4:8])
        for r in range(n_rows):
            row = lines[i + r].strip()
            rf = [f.strip() for f in row.split(",")]
            if len(rf) < 7 or _HEADER_ID.fullmatch(rf[0]):
                raise ParseError(
                    f"storm {storm_id} ({storm_name}) declares {n_rows} records "
                    f"but record {r + 1} is missing or malformed", line=i + r + 1)
            try:
                wind = float(rf[6])
            except ValueError as exc:
                raise ParseError(
                    f"storm {storm_id}: unreadable wind value {rf[6]!r}",
                    line=i + r + 1) from exc
            if wind == -99.0:
                missing += 1
                continue
            records.append(TrackRecord(
                storm_id=storm_id, storm_name=storm_name, year=year,
                date=rf[0], time=rf[1], status=rf[3],
                lat=_parse_latlon(rf[4]), lon=_parse_latlon(rf[5]),
                max_wind=wind * factor,
            ))
        i += n_rows
    return HurdatFile(records=records, n_storms=n_storms, missing_wind_count=missing)


@dataclass(frozen=True)
class AnnualMaxSeries:
    """Per-year maxima of the track winds, with gap years kept visible."""

    years: list[int]
    values: np.ndarray
    source: str = ""
    missing_years: list[int] = field(default_factory=list)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "years", [int(y) for y in self.years])
        if len(self.years) != vals.size:
            raise DomainError("one value per year required")
        if any(b <= a for a, b in zip(self.years, self.years[1:])):
            raise DomainError("years must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise DomainError("annual maxima must be finite")

    @property
    def k(self) -> int:
        return len(self.years)

    def to_sample(self, block_size_m: int = 1) -> BlockMaxSample:
        return BlockMaxSample(self.values, block_size_m=block_size_m,
                              label=self.source or "annual maxima")


def annual_maxima(parsed: HurdatFile | list[TrackRecord],
                  year_range: tuple[int, int] = (1915, 2020),
                  source: str = "") -> AnnualMaxSeries:
    """Per-year maximum wind over all records inside the year range.

    Years without any record are reported in ``missing_years`` rather
    than silently dropped.
    """
    records = parsed.records if isinstance(parsed, HurdatFile) else parsed
    y0, y1 = int(year_range[0]), int(year_range[1])
    if y1 < y0:
        raise DomainError(f"empty year range ({y0}, {y1})")
    per_year: dict[int, float] = {}
    for rec in records:
        year = rec.year
        if y0 <= year <= y1:
            prev = per_year.get(year)
            if prev is None or rec.max_wind > prev:
                per_year[year] = rec.max_wind
    if not per_year:
        raise DomainError(f"no records fall inside the year range ({y0}, {y1})")
    years = sorted(per_year)
    missing = [y for y in range(y0, y1 + 1) if y not in per_year]
    return AnnualMaxSeries(
        years=years,
        values=np.array([per_year[y] for y in years]),
        source=source,
        missing_years=missing,
    )


def write_annual_series_csv(series: AnnualMaxSeries, path: str):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["year", "max_wind"])
        for y, v in zip(series.years, series.values):
            w.writerow([y, repr(float(v))])


def read_annual_series_csv(path: str, source: str = "") -> AnnualMaxSeries:
    years: list[int] = []
    values: list[float] = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty annual-series file", line=1)
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                years.append(int(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"bad annual-series row {row!r}", line=ln) from exc
    return AnnualMaxSeries(years=years, values=np.array(values),
                           source=source or path)
