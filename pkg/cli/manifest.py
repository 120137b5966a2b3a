import json
import logging
import os
import platform
import tempfile
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np
import pydantic
import scipy

from config.settings import settings
from utils.errors import OutputError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def module_versions() -> Dict[str, str]:
    return {
        "subtrack": settings.APP_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


@dataclass
class RunManifest:
    """What a command produced, from which configuration, and how long each phase took."""

    command: str
    config_hash: str
    seed: int
    versions: Dict[str, str] = field(default_factory=module_versions)
    outputs: List[str] = field(default_factory=list)
    phase_seconds: Dict[str, float] = field(default_factory=dict)

    def add_output(self, name: str) -> None:
        if name not in self.outputs:
            self.outputs.append(name)

    @contextmanager
    def phase(self, name: str):
        started = time.perf_counter()
        try:
            yield
        finally:
            self.phase_seconds[name] = round(time.perf_counter() - started, 6)
            logger.info(f"Phase {name} took {self.phase_seconds[name]:.3f}s")

    def write(self, out_dir: str) -> str:
        """Written last and atomically; lists itself among the outputs."""
        self.add_output(MANIFEST_NAME)
        path = os.path.join(out_dir, MANIFEST_NAME)
        write_json(path, asdict(self))
        return path


def write_json(path: str, payload: Dict) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp_path, path)
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}") from e
