"""Galerkin Navier-Stokes with small noise.

Fields are complex numpy arrays of mode amplitudes in the order given by
``modes(K)``.
"""

from ._core import (
    Flow,
    InvalidArgument,
    NumericalBlowup,
    StoppingTimeout,
    chain_stationary,
    eigenvalues,
    modes,
    sandwich,
)

__all__ = [
    "Flow",
    "InvalidArgument",
    "NumericalBlowup",
    "StoppingTimeout",
    "chain_stationary",
    "eigenvalues",
    "modes",
    "sandwich",
]
