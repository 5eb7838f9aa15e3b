"""Access to the versioned preset config shipped with the package.

Presets pin the prompt templates, tool descriptions, and agent system
messages that the replay tests assert against; edits here are deliberate,
versioned changes.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any


@lru_cache(maxsize=1)
def load() -> dict[str, Any]:
    with resources.files("ontobench.data").joinpath("presets.json").open(
        encoding="utf-8"
    ) as fh:
        return json.load(fh)


def prompt(name: str) -> str:
    return load()["prompts"][name]


def system_message(agent: str) -> str:
    return load()["agents"][agent]["system_message"]


def tool_description(name: str) -> str:
    return load()["tools"][name]["description"]


def tool_parameters(name: str) -> dict[str, Any]:
    return load()["tools"][name]["parameters"]
