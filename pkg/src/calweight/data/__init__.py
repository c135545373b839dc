"""Bundled example populations."""

from __future__ import annotations

from importlib import resources

from ..design import FinitePopulation, read_population


def path(name: str):
    return resources.files(__name__).joinpath(name)


def synthetic_population() -> FinitePopulation:
    """Ten-unit population used for exhaustive unbiasedness checks."""
    with resources.as_file(path("synthetic_n10.csv")) as p:
        return read_population(p)


def surrogate_blocks() -> FinitePopulation:
    """Twenty synthetic blocks with y roughly proportional to x.

    Stands in for the classical 20-block household data set, which is not
    shipped; the square-root and log transformations of either column give
    regression lines that miss the origin.
    """
    with resources.as_file(path("surrogate_blocks_n20.csv")) as p:
        return read_population(p)
