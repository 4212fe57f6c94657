"""Self-supervised action-unit representation learning at desk scale."""

__version__ = "0.1.0"

from aurel.autodiff import DiffArray, Tape
from aurel.errors import ContractError
from aurel.rng import Rng

__all__ = ["DiffArray", "Tape", "ContractError", "Rng", "__version__"]
