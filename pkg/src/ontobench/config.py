"""Workbench configuration: gateway wiring, retrieval defaults, sandbox map."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .agents.codeexec import DEFAULT_INTERPRETERS
from .gateway import Gateway, HttpProvider, SamplingParams, scripted_gateway
from .sampling import DEFAULT_THOUGHT_TEMPERATURE


@dataclass
class GatewayConfig:
    provider: str = "http"  # http | scripted
    base_url: str = "http://127.0.0.1:8000/v1"
    model_name: str = "default"
    timeout_seconds: float = 60.0
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.4
    max_tokens: int = 1024
    script: list[Any] | None = None

    def sampling_params(self) -> SamplingParams:
        return SamplingParams(
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            model_name=self.model_name,
        )


@dataclass
class WorkbenchConfig:
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    max_units: int = 300
    overlap: int = 50
    k: int = 4
    budget_units: int = 2000
    thought_temperature: float = DEFAULT_THOUGHT_TEMPERATURE
    sandbox_timeout: float = 120.0
    interpreters: dict[str, list[str]] = field(
        default_factory=lambda: dict(DEFAULT_INTERPRETERS)
    )
    plot_name: str = "plot_O2_spline_fit_potential.svg"
    spline_name: str = "spline_params.json"
    results_name: str = "calculation_results.json"
    human_input_timeout: float = 300.0
    scenarios: dict[str, Any] = field(default_factory=dict)


def load_config(path: str | Path | None = None) -> WorkbenchConfig:
    """Defaults overlaid with the JSON config file, when one is given."""
    config = WorkbenchConfig()
    if path is None:
        return config
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    gateway_data = data.pop("gateway", {})
    for key, value in gateway_data.items():
        if not hasattr(config.gateway, key):
            raise ValueError(f"unknown gateway config key {key!r}")
        setattr(config.gateway, key, value)
    for key, value in data.items():
        if not hasattr(config, key):
            raise ValueError(f"unknown config key {key!r}")
        setattr(config, key, value)
    return config


def build_gateway(config: GatewayConfig) -> Gateway:
    """Gateway instance for the configured provider."""
    params = config.sampling_params()
    if config.provider == "scripted":
        from .agents.scenarios import _script_step

        steps = [_script_step(s) for s in (config.script or [])]
        return scripted_gateway(steps, default_params=params)
    if config.provider == "http":
        provider = HttpProvider(
            config.base_url,
            timeout_seconds=config.timeout_seconds,
            api_key_env=config.api_key_env,
        )
        return Gateway(provider, default_params=params)
    raise ValueError(f"unknown gateway provider {config.provider!r}")
