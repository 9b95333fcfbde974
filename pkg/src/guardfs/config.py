"""INI-style configuration for the command line tool.

Sections and keys are fixed; anything else is an error, so a typo never
silently falls back to a default. Relative paths are resolved against the
directory holding the file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "mount": {
        "mountpoint": (Path, None),
        "underlay": (Path, None),
        "mode": (str, "none"),
        "t": (float, 5.0),
        "window": (int, 5),
        "model": (Path, None),
        "channel": (str, None),
        "threads": (int, 4),
        "fail_closed": (bool, False),
    },
    "detector": {
        "kind": (str, "forest"),
        "trees": (int, 100),
        "max_depth": (int, None),
        "seed": (int, 0),
    },
    "throughput": {
        "delta": (float, 200e6),
        "nominal": (float, 200e6),
    },
    "experiment": {
        "family": (str, "aggressive-parallel"),
        "rate": (float, 8e6),
        "corpus_mb": (int, 100),
        "files": (int, 400),
        "seeds": (int, 1),
        "cap": (float, 300.0),
        "backend": (str, "live"),
        "benign": (str, ""),
        "out": (Path, None),
    },
}

PATH_KEYS = {(s, k) for s, keys in SCHEMA.items() for k, (t, _) in keys.items() if t is Path}


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    values: dict[str, dict[str, object]] = field(default_factory=dict)
    source: Path | None = None

    def get(self, section: str, key: str):
        if key not in SCHEMA.get(section, {}):
            raise KeyError(f"{section}.{key}")
        return self.values.get(section, {}).get(key, SCHEMA[section][key][1])

    def section(self, name: str) -> dict[str, object]:
        return {k: self.get(name, k) for k in SCHEMA[name]}


def _convert(section: str, key: str, raw: str, base: Path):
    typ = SCHEMA[section][key][0]
    try:
        if typ is bool:
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is Path:
            p = Path(raw.strip()).expanduser()
            return (p if p.is_absolute() else base / p).resolve()
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {typ.__name__}") from None


def parse_config(text: str, base: str | Path = ".") -> Config:
    cp = configparser.ConfigParser(interpolation=None, default_section="\0none")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    base = Path(base).resolve()
    values: dict[str, dict[str, object]] = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]; expected one of {', '.join(SCHEMA)}")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            values.setdefault(sec, {})[key] = _convert(sec, key, raw, base)
    return Config(values)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    cfg = parse_config(text, p.resolve().parent)
    cfg.source = p.resolve()
    return cfg
