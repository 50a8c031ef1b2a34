"""
Runtime settings for the CSI power tracker
"""

import os
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()


def _env_flag(name: str, default: bool = False) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


class Settings:
    """Application settings and configuration"""

    def __init__(self):
        """Initialize settings"""
        self.load_settings()

    def load_settings(self):
        """Load settings from environment or defaults"""
        # Logging settings
        self.log_level = os.getenv("LOG_LEVEL", "INFO")
        self.log_dir = Path(os.getenv("CSITRACK_LOG_DIR", "logs"))
        self.log_rotation = "1 day"
        self.log_retention = "30 days"

        # Output settings
        self.out_dir = Path(os.getenv("CSITRACK_OUT_DIR", "output"))
        self.debug_tensors = _env_flag("CSITRACK_DEBUG_TENSORS")

        # Live ingest
        self.udp_poll_timeout = 0.5  # seconds
        self.queue_wait = 1.0  # seconds

        # Bench
        self.bench_cpis = 10000

    def get_setting(self, key: str, default: Any = None) -> Any:
        """Get a setting value"""
        return getattr(self, key, default)

    def update_setting(self, key: str, value: Any):
        """Update a setting value"""
        setattr(self, key, value)

    def to_dict(self) -> Dict[str, Any]:
        """Convert settings to dictionary"""
        return {
            key: value for key, value in self.__dict__.items()
            if not key.startswith('_')
        }
