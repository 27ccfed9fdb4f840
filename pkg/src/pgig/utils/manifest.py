# -*- coding: utf-8 -*-
"""
Run manifests for pgig.

Every command writes manifest.json next to its outputs. It records the
command, its arguments, the fully resolved configuration, the seed, input
and output paths, the toolkit version, timings and a few host facts, and
is enough to rerun the command bit-exactly.
"""

import json
import platform
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Union

import psutil

from pgig import __version__
from pgig.utils.errors import ConfigError

MANIFEST_NAME = "manifest.json"


def host_facts() -> Dict[str, Any]:
    """Machine description stored with a run (never used to reproduce it)."""
    memory = psutil.virtual_memory()
    return {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "cpu_count": psutil.cpu_count(logical=True),
        "memory_gb": round(memory.total / 1024**3, 1),
    }


@dataclass
class RunManifest:
    """Everything needed to reproduce one command."""

    command: str
    arguments: Dict[str, Any]
    config: Dict[str, Dict[str, str]]
    seed: int
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    version: str = __version__
    started: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    timings: Dict[str, float] = field(default_factory=dict)
    host: Dict[str, Any] = field(default_factory=host_facts)

    def time(self, label: str, start: float) -> None:
        """Record seconds elapsed since start (a time.perf_counter() value)."""
        self.timings[label] = round(time.perf_counter() - start, 6)

    def save(self, out_dir: Union[str, Path]) -> str:
        """Write manifest.json into out_dir."""
        path = Path(out_dir) / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return str(path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        """
        Read a manifest file (or the manifest.json inside a directory).

        Raises:
            FileNotFoundError: If the manifest does not exist
            ConfigError: If it is not a valid manifest
        """
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.exists():
            raise FileNotFoundError(f"manifest not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e.msg}", str(path), e.lineno) from None

        missing = [k for k in ("command", "arguments", "config", "seed") if k not in data]
        if missing:
            raise ConfigError(f"manifest lacks {', '.join(missing)}", str(path))
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})
