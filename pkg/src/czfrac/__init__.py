"""Fractional-order operators, singular-kernel evaluation, and a nonlocal solver."""

from .core import (
    CoeffKernel,
    CzfracError,
    DivergenceError,
    EngineError,
    Field,
    FracParams,
    GridSpec,
    NonConvergenceError,
    ParameterError,
    QuadratureError,
    builtin_kernels,
    field_norms,
    make_params,
    read_field,
    write_field,
)

__version__ = "0.1.0"
