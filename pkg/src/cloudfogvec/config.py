"""TOML config documents for scenarios.

Flat keys map onto :class:`Scenario` fields, ``vns_per_cluster`` is an
alias for ``vns`` and ``[profiles.<KIND>]`` tables override device profiles::

    architecture = "multi-zone"
    pattern = "one-task-each-cluster"
    case = "CFA"
    demands = [1000, 2000]
    rr_hops = 2

    [profiles.NF]
    p_idle = 8.0
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .workload import Scenario

ALIASES = {"vns_per_cluster": "vns", "arch": "architecture", "demand": "demands"}


def scenario_from_mapping(data: Mapping[str, Any], base: Scenario | None = None) -> Scenario:
    fields: dict[str, Any] = {}
    for key, value in data.items():
        if key == "profiles":
            fields["overrides"] = {k: dict(v) for k, v in value.items()}
            continue
        key = ALIASES.get(key, key)
        if key == "demands" and not isinstance(value, (list, tuple)):
            value = [value]
        fields[key] = value
    if "demands" in fields:
        fields["demands"] = tuple(float(w) for w in fields["demands"])
    if base is None:
        return Scenario.from_dict(fields)
    unknown = set(fields) - set(base.to_dict())
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    return base.with_(**fields)


def load_config(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    return scenario_from_mapping(data)
