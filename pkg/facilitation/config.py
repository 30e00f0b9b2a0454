from pydantic_settings import BaseSettings
from pydantic import Field


class Settings(BaseSettings):
    # Parallel grid work (joblib)
    workers: int = Field(default=1, ge=1, alias='FACILITATION_WORKERS')

    # Output
    out_dir: str = Field(default="out", alias='FACILITATION_OUT_DIR')

    # Stochastic ensembles
    default_seed: int = Field(default=20240611, ge=0, alias='FACILITATION_SEED')

    # App settings
    environment: str = Field(default="development", alias='FACILITATION_ENV')
    debug: bool = Field(default=False, alias='FACILITATION_DEBUG')

    class Config:
        env_file = ".env"
        extra = "ignore"  # Ignore unrelated environment variables

    @property
    def is_development(self) -> bool:
        return self.environment == "development"


settings = Settings()
