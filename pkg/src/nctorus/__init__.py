"""Numerical pseudodifferential calculus on noncommutative n-tori.

Submodules
----------
core      twisted Fourier algebra: elements, product, trace, matrices
symbols   lattice / polynomial / classical symbols with exact xi-derivatives
psido     operator action, truncated matrices, exact and asymptotic products
elliptic  ellipticity tests, parametrix recursion, Laplace-Beltrami operators
spectral  Sobolev norms, duality, spectra, Weyl and Schatten diagnostics
traces    lattice and integral trace formulas, Meyer interpolation window
fileio    on-disk formats for elements, symbols, matrices, spectra, traces
cli       batch driver (`nctorus run/selftest/export-defaults`)

Imports are lazy so that thread-cap environment variables set by the CLI
take effect before numpy loads.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "core",
    "symbols",
    "psido",
    "elliptic",
    "spectral",
    "traces",
    "fileio",
    "defaults",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
