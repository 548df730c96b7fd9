"""Port-Hamiltonian building blocks for coupled electro-thermo-mechanical models."""

__version__ = "0.1.0"

from . import errors, ph  # noqa: E402
from .errors import MphsError  # noqa: E402

__all__ = [
    "__version__",
    "errors",
    "ph",
    "MphsError",
    "circuit",
    "coupled",
    "electromagnetics",
    "mechanics",
    "mor",
    "thermal",
]


def __getattr__(name):
    if name in {"circuit", "coupled", "electromagnetics", "mechanics", "mor", "thermal", "grid", "io"}:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(name)
