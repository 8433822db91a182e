"""Two-qubit open-system toolkit: dissipative synchronization vs. memory effects."""

__version__ = "0.1.0"

from . import collision, experiments, lindblad, measures, qcore  # noqa: F401
