"""Raman mineral spectra -> country-of-origin pipeline (C++ core bindings)."""

from ._core import (
    Classifier,
    CountryPolygonSet,
    RamangeoError,
    clean_locality,
    count_params,
    detect_synthetic,
    evaluate,
    iso3166_alpha3,
    minmax_normalize,
    parse_spectrum,
    parse_spectrum_file,
    resample,
    train_holdout,
)

__all__ = [
    "Classifier",
    "CountryPolygonSet",
    "RamangeoError",
    "clean_locality",
    "count_params",
    "detect_synthetic",
    "evaluate",
    "iso3166_alpha3",
    "minmax_normalize",
    "parse_spectrum",
    "parse_spectrum_file",
    "resample",
    "train_holdout",
]
