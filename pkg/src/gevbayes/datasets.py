"""Bundled data fixtures.

``data/atlantic_hurdat.txt`` is a frozen HURDAT2-format snapshot of
Atlantic-basin annual peak intensities, 1915-2020, one synthetic best
track per year calibrated against the published annual maximum wind
statistics of the revised NHC record. It is shipped so analyses are
reproducible offline and immune to live-database revisions; it is not
the live NOAA database.
"""

from __future__ import annotations

from importlib import resources

from .hurdat import AnnualMaxSeries, annual_maxima, parse_hurdat

__all__ = ["atlantic_hurdat_path", "atlantic_annual_maxima"]


def atlantic_hurdat_path() -> str:
    """Filesystem path of the bundled HURDAT2 fixture."""
    return str(resources.files("gevbayes").joinpath("data/atlantic_hurdat.txt"))


def atlantic_annual_maxima(year_range: tuple[int, int] = (1915, 2020)) -> AnnualMaxSeries:
    """Annual maximum wind speeds (km/h) extracted from the bundled fixture."""
    parsed = parse_hurdat(atlantic_hurdat_path(), winds_in_knots=True)
    return annual_maxima(parsed, year_range=year_range,
                         source="atlantic annual maximum wind speeds (bundled fixture)")
