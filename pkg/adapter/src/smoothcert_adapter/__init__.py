"""Model-serving side of the smoothcert external-oracle protocol.

On each SAMPLE request the adapter draws Gaussian-perturbed copies of
the identified input, runs a torch classifier over them, and answers
with the class vote counts; the statistics all stay on the harness
side of the wire.
"""

from .config import AdapterConfig
from .datasets import UnknownPointError, load_points
from .models import load_model
from .protocol import HANDSHAKE, serve

__all__ = [
    "AdapterConfig",
    "HANDSHAKE",
    "UnknownPointError",
    "load_model",
    "load_points",
    "serve",
]
