"""Error bounds for band-constrained quantum dynamics.

Build gapped Hamiltonians, block-diagonalize them with a Schrieffer-Wolff
transformation, and compare full against band-projected Heisenberg
evolution of an observable.
"""

__version__ = "0.1.0"
