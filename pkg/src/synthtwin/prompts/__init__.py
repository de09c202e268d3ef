"""Prompt template assets for live chat backends.

Templates carry literal {placeholder} markers; render() substitutes them by
plain string replacement so braces inside JSON examples survive untouched.
"""

from importlib import resources
from typing import Mapping

_TEMPLATE_NAMES = ("summarize", "anonymize", "similarity", "counterfactual", "augment")


def load_template(name: str) -> str:
    if name not in _TEMPLATE_NAMES:
        raise ValueError(f"unknown prompt template {name!r}; have {_TEMPLATE_NAMES}")
    return resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")


def render(template: str, values: Mapping[str, str]) -> str:
    rendered = template
    for key, value in values.items():
        rendered = rendered.replace("{" + key + "}", value)
    return rendered
