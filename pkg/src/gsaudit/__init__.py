"""Numerical audit toolkit for Gelfand-Shilov smoothing semigroups.

Verifies, on explicit Hermite-basis model problems, every quantitative step
of an uncertainty principle for functions with Gelfand-Shilov derivative
bounds (tail localization, Besicovitch coverings, good/bad ball
classification, analytic local estimates, assembly with measured constants)
together with the induced observability estimates for the model flows.
"""

__version__ = "0.1.0"
