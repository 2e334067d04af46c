"""Exact symbolic verification of type B 3-fold SUSY quantum systems.

The package builds gauged Hamiltonians and supercharges from a 3x3
rational parameter matrix and a function f, applies general and
GL(3) changes of frame, and checks the structural identities of such
systems (sector preservation, covariance, invariants, superalgebra,
the type A limit) with zero-residual exact arithmetic.
"""

__version__ = "0.1.0"
