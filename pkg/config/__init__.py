# config/__init__.py

from .config_loader import (
    DEFAULT_CONFIG_PATH,
    SEED_ENV,
    RunConfig,
    MarketBundle,
    load_config,
    load_market_bundle,
    load_market_config,
    dump_config,
    input_fingerprint,
)

__all__ = [
    "DEFAULT_CONFIG_PATH",
    "SEED_ENV",
    "RunConfig",
    "MarketBundle",
    "load_config",
    "load_market_bundle",
    "load_market_config",
    "dump_config",
    "input_fingerprint",
]
