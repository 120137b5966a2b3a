from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables"""

    # Logging Configuration
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "json"  # Options: json, text

    # Execution Configuration
    WORKERS: int = 1
    TRANSITION_SHARD_SIZE: int = 20000
    SHOW_PROGRESS: bool = False

    # Output Configuration
    OUTPUT_DIR: str = "./out"
    DEFAULT_SEED: int = 20160705

    APP_VERSION: str = "0.1.0"

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")


# Create settings instance
settings = Settings()
