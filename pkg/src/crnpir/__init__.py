"""Multi-server private information retrieval for spectrum databases."""

from .errors import *  # noqa: F401,F403
from .kernels import BACKEND
from .netproto import FaultProfile, ServerDescriptor, ServerHandler, ServerThread, fetch_rows, private_fetch
from .params import Protocol, ProtocolParams
from .spectrumdb import DatabaseMatrix, GridConfig, SpectrumKey, generate_database, load_database, store_database

__all__ = [
    "BACKEND", "FaultProfile", "ServerDescriptor", "ServerHandler", "ServerThread", "fetch_rows",
    "private_fetch", "Protocol", "ProtocolParams", "DatabaseMatrix", "GridConfig", "SpectrumKey",
    "generate_database", "load_database", "store_database",
]
