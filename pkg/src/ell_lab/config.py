"""Flat `key = value` scenario files.

One assignment per line, `#` starts a comment.  Values are parsed as int,
float, a whitespace/comma separated list of numbers, or left as strings.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Union

_NUM = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$|^[+-]?(inf|nan)$", re.IGNORECASE)


class ConfigError(ValueError):
    pass


def parse_value(text: str):
    text = text.strip()
    if not text:
        raise ConfigError("empty value")
    parts = [p for p in re.split(r"[,\s]+", text) if p]
    if len(parts) > 1 and all(_NUM.match(p) for p in parts):
        return [_number(p) for p in parts]
    if _NUM.match(text):
        return _number(text)
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _number(tok: str):
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def parse_config(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        if key in cfg:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        cfg[key] = parse_value(value)
    return cfg


def load_config(path: Union[str, Path]) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return " ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: dict) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in cfg.items())
