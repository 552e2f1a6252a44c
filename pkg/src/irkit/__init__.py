"""Static IR-drop toolkit for on-chip power delivery networks.

Submodules load lazily so the CLI can pin BLAS thread counts before
numpy is imported.
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "cli",
    "featurize",
    "grids",
    "hird",
    "metrics",
    "netlist",
    "pdngen",
    "solver",
)

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name):
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
