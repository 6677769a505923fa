"""Desk-scale simulations of Boson/Fermion sampling, Gaussian noise sensitivity and correlated qubit noise."""

__version__ = "0.1.0"

from ._accel import USE_NUMBA
from .errors import (
    DegenerateInputError,
    InvalidArgumentError,
    NotFoundError,
    NumericalContractError,
    QNoiseLabError,
    SizeLimitError,
)
from .matrix import (
    det_lu,
    det_naive,
    gaussian_matrix,
    haar_rows,
    per_naive,
    per_ryser,
    submatrix,
    worked_example_matrix,
)
from .rng import make_rng, substream
from .sampling import (
    OutcomeDistribution,
    boson_distribution,
    fermion_distribution,
    fourier_distribution,
    sample,
)
