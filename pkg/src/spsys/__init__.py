"""Parser, validator and evaluator for simulated-physical system architecture models."""

__version__ = "0.1.0"

from .model import Model, SpsysError  # noqa: E402
from .parser import parse, parse_file  # noqa: E402
from .serializer import serialize  # noqa: E402
from .validator import validate  # noqa: E402
from .metrics import compute_all  # noqa: E402

__all__ = ["Model", "SpsysError", "parse", "parse_file", "serialize", "validate", "compute_all", "__version__"]
