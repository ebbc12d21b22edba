"""Non-commutative probability on free *-bialgebras.

Modules
-------
ncpoly      free *-algebra polynomials over self-adjoint or matrix-unitary letters
coalg       coproduct, counit, antipode and finite-dimensional subcoalgebras
functional  moment functionals, convolution, Gaussian moments and limit theorems
positivity  moment matrices and positivity tests
fock        generator triplets and the truncated symmetric Fock space
qsde        bin-wise integration of unitary quantum stochastic processes
cli         command-line front end
"""

from .ncpoly import Alphabet, NCPolynomial
from .functional import (
    CovarianceMatrix,
    GeneratorFunctional,
    MomentFunctional,
    conv_exp,
    convolve,
    cumulant_functional,
    gaussian_functional,
    gaussian_moments,
)
from .fock import BinGrid, FockVector, Triplet
from .qsde import QSDEModel, UnitaryProcessState

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "NCPolynomial",
    "CovarianceMatrix",
    "MomentFunctional",
    "GeneratorFunctional",
    "convolve",
    "conv_exp",
    "cumulant_functional",
    "gaussian_functional",
    "gaussian_moments",
    "BinGrid",
    "FockVector",
    "Triplet",
    "QSDEModel",
    "UnitaryProcessState",
]
