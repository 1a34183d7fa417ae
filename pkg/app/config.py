from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Logging
    log_level: str = "INFO"

    # Execution
    workers: int = 1

    # Enumeration caps
    enumeration_edge_cap: int = 24
    spin_enumeration_cap: int = 10 ** 8
    enumeration_block_size: int = 2 ** 14

    # Sampler defaults
    default_burn_in: int = 10_000
    min_batches: int = 20

    # Output
    output_dir: str = "results"

    model_config = SettingsConfigDict(
        env_prefix="ROBUST_POTTS_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


# Global settings instance
settings = Settings()
