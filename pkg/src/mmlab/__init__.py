"""Numerical laboratory for multi-matrix Gibbs models at low temperature.

Modules:

* :mod:`mmlab.ncpoly` -- noncommutative polynomials and their derivatives;
* :mod:`mmlab.matnum` -- evaluation on Hermitian tuples, empirical laws;
* :mod:`mmlab.trapping` -- trapping inequalities, confinement classifier, flows;
* :mod:`mmlab.sampler` -- MCMC for matrix models and Dyson-Schwinger checks;
* :mod:`mmlab.gas` -- eigenvalue gas of the commutator model;
* :mod:`mmlab.equilibrium` -- equilibrium measures and closed forms;
* :mod:`mmlab.maps` -- planar-map expansions of moments;
* :mod:`mmlab.acceptance` -- quantitative checks behind ``mmlab verify``.
"""

from ._backend import BACKEND
from .ncpoly import NCPolynomial, TensorPolynomial

__version__ = "0.1.0"

__all__ = ["BACKEND", "NCPolynomial", "TensorPolynomial", "__version__"]
