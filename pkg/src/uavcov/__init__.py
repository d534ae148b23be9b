"""Monte Carlo uplink coverage simulator for UAVs in urban mmWave networks."""

__version__ = "0.1.0"

from ._kernels import active_backend, available_backends, set_backend  # noqa: F401
