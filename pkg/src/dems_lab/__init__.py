"""Joint state and noise-smoothness estimation for linear systems under colored noise."""

__version__ = "0.1.0"

from .datasets import Dataset, TrialResult, read_dataset, write_dataset
from .free_energy import SmoothnessPrior, free_energy, free_energy_grads
from .gencoord import LinearPlant, lift_system
from .noise_model import NoiseSpec, generalized_precision, smoothness_precision
from .observers import ObserverConfig, run_dem_fixed_s, run_dems

__all__ = [
    "Dataset", "LinearPlant", "NoiseSpec", "ObserverConfig", "SmoothnessPrior", "TrialResult",
    "free_energy", "free_energy_grads", "generalized_precision", "lift_system", "read_dataset",
    "run_dem_fixed_s", "run_dems", "smoothness_precision", "write_dataset", "__version__",
]
