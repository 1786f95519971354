"""Nodal discontinuous Galerkin solver for the pre-balanced constant-diagonal Green-Naghdi equations."""

__version__ = "0.1.0"

THREADS_ENV = "GNDG_NUM_THREADS"
