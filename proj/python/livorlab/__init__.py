"""Skin reflectance forward model, Monte Carlo transport and fitting."""

import os as _os

# wheels carry the extinction table next to the module
_data = _os.path.join(_os.path.dirname(__file__), "data")
if _os.path.isdir(_data):
    _os.environ.setdefault("LIVORLAB_DATA", _data)

from ._core import (
    Layer,
    LayerStack,
    Lut,
    MCResult,
    MieResult,
    SimConfig,
    Spectrum,
    absorption_spectrum,
    build_lut,
    bulk_scattering,
    cohb_fraction,
    fit,
    load_extinction_db,
    load_lut,
    mie_single,
    normalize_reflectance,
    predict_spectrum,
    simulate,
    __version__,
)

__all__ = [
    "Layer",
    "LayerStack",
    "Lut",
    "MCResult",
    "MieResult",
    "SimConfig",
    "Spectrum",
    "absorption_spectrum",
    "build_lut",
    "bulk_scattering",
    "cohb_fraction",
    "fit",
    "load_extinction_db",
    "load_lut",
    "mie_single",
    "normalize_reflectance",
    "predict_spectrum",
    "simulate",
]
