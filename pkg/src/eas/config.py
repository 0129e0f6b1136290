"""Flat YAML configuration files for ``eas search`` and ``eas compare``.

Every :class:`~eas.search.SearchConfig` field is a top-level key. Two extra
keys name the start point: ``start_arch`` (an ``eas-arch v1`` file) and
``start_weights`` (an ``EASW`` file). Relative paths resolve against the
config file's directory.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .search import SearchConfig

START_KEYS = ("start_arch", "start_weights")


def load_config(path, overrides: dict | None = None) -> tuple[SearchConfig, dict]:
    """Returns the search config and the start-point paths (possibly ``None``)."""
    path = Path(path)
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping of keys to values")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ValueError(f"{path}: config must be flat, nested keys {nested}")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    start = {}
    for key in START_KEYS:
        value = data.pop(key, None)
        start[key] = None if value is None else str((path.parent / value).resolve())
    return SearchConfig.from_mapping(data), start


def dump_config(config: SearchConfig, path, start: dict | None = None) -> None:
    data = config.to_mapping()
    data.update({k: v for k, v in (start or {}).items() if v is not None})
    Path(path).write_text(yaml.safe_dump(data, sort_keys=True), encoding="utf-8")
