"""Application configuration: endpoint, model, prices, backend selection and
loop parameters.  Values merge as defaults < config file < CLI flags."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .agents import ModelPricing

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class AppConfig:
    model: str = "mock-model"
    endpoint: str = "https://api.openai.com/v1"
    credential_env: str = "CUDAPILOT_API_KEY"
    hardware_info: str = "Unknown GPU (set hardware_info in the config file)"
    backend: str = "mock"  # mock | cuda
    rounds: int = 3
    debug_rounds: int = 3
    profile_mode: str = "filtered"
    workers: int = 1
    seed: int = 0
    run_dir: str = "runs"
    temperature: float = 0.2
    max_retries: int = 3
    backoff_base: float = 1.0
    run_timeout: float = 300.0
    compile_timeout: float = 120.0
    prices: dict = field(default_factory=dict)  # model -> ModelPricing

    def pricing_for(self, model: str) -> ModelPricing:
        return self.prices.get(model, ModelPricing())


def load_config(path: str | Path | None) -> AppConfig:
    """Read an AppConfig from a TOML file; a missing path yields defaults."""
    if path is None:
        return AppConfig()
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    prices = {}
    for model, entry in (data.get("prices") or {}).items():
        prices[model] = ModelPricing.per_million(
            float(entry.get("input_per_million", 0.0)),
            float(entry.get("output_per_million", 0.0)),
        )
    known = {
        name: data[name]
        for name in (
            "model",
            "endpoint",
            "credential_env",
            "hardware_info",
            "backend",
            "rounds",
            "debug_rounds",
            "profile_mode",
            "workers",
            "seed",
            "run_dir",
            "temperature",
            "max_retries",
            "backoff_base",
            "run_timeout",
            "compile_timeout",
        )
        if name in data
    }
    return replace(AppConfig(), prices=prices, **known)


def apply_overrides(config: AppConfig, **overrides) -> AppConfig:
    """Apply non-None CLI flag values over a loaded config."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **updates)
