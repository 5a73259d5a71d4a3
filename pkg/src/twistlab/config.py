"""Run configuration: dataclass defaults, flat key=value files, flag overrides."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

DEFAULT_QS = (101, 211, 499, 1009, 2003, 3001)


@dataclass
class RunConfig:
    command: str = "verify-all"
    forms: tuple[str, ...] = ("11a",)
    q: int = 101
    qs: tuple[int, ...] = DEFAULT_QS
    s: float = 0.5
    ell: int = 1
    ellp: int = 1
    k: int = 0
    kind: str = "first"
    lam: float = 0.1
    resonator_variant: str = "extreme"
    resonator_L: float = 9.0
    interval: tuple[float, float] = (0.0, 3.141592653589793)
    xi: float | None = None
    threshold: float | None = None
    cache: str | None = None
    output: str | None = None
    fmt: str = "csv"
    seed: int = 20240101
    jobs: int = 1
    quick: bool = False
    assert_: bool = False

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def echo(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def cache_dir(self) -> Path | None:
        root = self.cache or os.environ.get("TWISTLAB_CACHE")
        return Path(root) if root else None


def _coerce(f: dataclasses.Field, raw: str):
    default = f.default
    if f.name in ("forms",):
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if f.name == "qs":
        return tuple(int(x) for x in raw.split(",") if x.strip())
    if f.name == "interval":
        lo, hi = (float(x) for x in raw.split(","))
        return (lo, hi)
    if f.name in ("xi", "threshold"):
        return None if raw.lower() in ("", "none") else float(raw)
    if f.name in ("cache", "output"):
        return None if raw.lower() in ("", "none") else raw
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{f.name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_kv(text: str) -> dict:
    """Flat key=value lines; '#' starts a comment."""
    known = {f.name: f for f in fields(RunConfig)}
    known["assert"] = known["assert_"]
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key=value")
        key, val = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ValueError(f"line {n}: unknown key {key!r}")
        f = known[key]
        out[f.name] = _coerce(f, val)
    return out


def load(path: str | Path | None = None, **overrides) -> RunConfig:
    """Defaults, then the file (if any), then explicit overrides that are not None."""
    values = {}
    if path is not None:
        values.update(parse_kv(Path(path).read_text()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


__all__ = ["RunConfig", "DEFAULT_QS", "parse_kv", "load"]
