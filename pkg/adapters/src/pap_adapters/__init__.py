"""pap-wire/1 model adapter servers."""
from .engines import create_engine
from .server import AdapterConfig, build_app, serve, serve_ovd, serve_sam, serve_vlm

__version__ = "0.1.0"

__all__ = ["AdapterConfig", "build_app", "create_engine", "serve",
           "serve_ovd", "serve_sam", "serve_vlm"]
