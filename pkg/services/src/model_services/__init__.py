"""Model services: embedding, inversion, and judging behind one HTTP surface."""

from .app import create_app
from .backends import Backend, DeterministicBackend, JudgeOutputUnparseable
from .cassette import CassetteRecorder, CassetteStore
from .config import ServiceConfig

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "CassetteRecorder",
    "CassetteStore",
    "DeterministicBackend",
    "JudgeOutputUnparseable",
    "ServiceConfig",
    "create_app",
]
