"""Sponsored SMS/USSD maternal-health service with a simulated telco gateway."""

from .config import Config, load_config
from .service import ServiceContext

__all__ = ["Config", "ServiceContext", "load_config"]
__version__ = "0.1.0"
