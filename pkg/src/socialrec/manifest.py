"""Run manifests: every artifact points back at the run that produced it."""

from __future__ import annotations

import json
import platform
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

from .utils import atomic_write_text

MANIFEST_FILENAME = "manifest.json"


@dataclass
class RunManifest:
    command: str
    seed: int
    config_hash: str = ""
    dataset_hash: str = ""
    argv: list[str] = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    wall_clock_s: Optional[float] = None
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def finish(self) -> None:
        self.wall_clock_s = time.perf_counter() - self._started

    def reference(self) -> dict:
        """Stable identity embedded in reports; excludes timing, so reruns of
        the same seeded command produce byte-identical report files."""
        return {
            "command": self.command,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "dataset_hash": self.dataset_hash,
            "manifest_file": MANIFEST_FILENAME,
        }

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "dataset_hash": self.dataset_hash,
            "argv": self.argv,
            "versions": self.versions,
            "wall_clock_s": self.wall_clock_s,
        }

    def write(self, path: str) -> None:
        self.finish()
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def collect_versions() -> dict:
    import numpy
    import torch

    from . import __version__

    return {
        "socialrec": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "torch": torch.__version__,
    }


def new_manifest(command: str, seed: int, config_hash: str = "",
                 dataset_hash: str = "") -> RunManifest:
    return RunManifest(
        command=command,
        seed=seed,
        config_hash=config_hash,
        dataset_hash=dataset_hash,
        argv=list(sys.argv),
        versions=collect_versions(),
    )
