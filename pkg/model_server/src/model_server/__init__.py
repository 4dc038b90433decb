"""Masked-token prediction server for the clozerepair wire protocol."""

__version__ = "0.1.0"

from .app import Service, create_app, serve_stdio
from .backends import HFMaskedLM, NgramBackend
from .protocol import ProtocolError, validate_request
