from .config import AppConfig, load_config
from .service import SessionService, create_app

__all__ = ["AppConfig", "load_config", "SessionService", "create_app"]
