"""Roesser-model state-space realizations of convolutional layers."""

from .analysis import (
    RankCertificate,
    VerificationReport,
    dim_report,
    minimality_certificate,
    numerical_rank,
    observability_1d,
    verify_equivalence,
)
from .errors import FormatError, RoesserError, ShapeError, UnsupportedError
from .realization import (
    RoesserRealization,
    StridedRealization,
    build_1d,
    build_2d,
    build_dilated,
    build_nd,
    build_strided,
    mat,
    realize,
)
from .simulator import impulse_response, run_layer, simulate, simulate_strided
from .tensorcore import (
    ConvConfig,
    Kernel,
    Padding,
    Signal,
    convolve,
    crop_for_padding,
    dilate_kernel,
    reshape_strided,
)

__version__ = "0.1.0"
