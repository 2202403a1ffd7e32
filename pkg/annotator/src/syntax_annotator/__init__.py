"""Syntactic annotation exporter: batch sidecar files and a local HTTP service."""

from .backends import BackendError, HanlpBackend, LexiconBackend, get_backend
from .exporter import ExportJob, JobError, export
from .service import BackgroundServer, make_server, serve

__version__ = "0.1.0"

__all__ = [
    "BackendError", "HanlpBackend", "LexiconBackend", "get_backend",
    "ExportJob", "JobError", "export",
    "BackgroundServer", "make_server", "serve",
    "__version__",
]
