"""Averaging operators along polynomial curves with affine arclength measure.

Modules: ``polycurve`` (exact polynomials and roots), ``decomp``
(centred-monomial decomposition), ``geomcheck`` (the geometric inequality),
``measureops`` (measures, pullbacks, the operator, Lorentz norms),
``combinat`` (refinement and iterated lower bounds), ``experiments``
(reproductions) and ``cli``.
"""

from .polycurve import CurvePoly, DegenerateCurve, Polynomial

__all__ = ["CurvePoly", "DegenerateCurve", "Polynomial"]
__version__ = "0.1.0"
