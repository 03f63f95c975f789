from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

DEFAULT_OUTPUT_DIR = Path("results")


class Settings(BaseSettings):
    threads: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    output_dir: Optional[Path] = None
    truth_cache: Optional[Path] = None

    model_config = SettingsConfigDict(env_prefix="SDOT_", env_file=".env", extra="ignore")


def get_settings() -> Settings:
    """Re-read the environment and `.env`; the CLI calls this once per invocation."""
    return Settings()
