import io
import os
import tempfile
import zipfile
from typing import Dict

import numpy as np

from .errors import OutputError

# Fixed zip timestamp so identical arrays give identical bytes.
_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_arrays(path: str, arrays: Dict[str, np.ndarray]) -> None:
    """Write `arrays` as an .npz archive, atomically and deterministically."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
        with os.fdopen(fd, "wb") as raw, zipfile.ZipFile(raw, "w", zipfile.ZIP_DEFLATED) as archive:
            for name in sorted(arrays):
                buffer = io.BytesIO()
                np.lib.format.write_array(buffer, np.ascontiguousarray(arrays[name]), allow_pickle=False)
                info = zipfile.ZipInfo(f"{name}.npy", date_time=_EPOCH)
                info.compress_type = zipfile.ZIP_DEFLATED
                info.external_attr = 0o644 << 16
                archive.writestr(info, buffer.getvalue())
        os.replace(tmp_path, path)
    except OSError as e:
        raise OutputError(f"Cannot write archive {path}: {e}") from e


def load_arrays(path: str) -> Dict[str, np.ndarray]:
    try:
        with np.load(path, allow_pickle=False) as data:
            return {name: data[name] for name in data.files}
    except (OSError, ValueError) as e:
        raise OutputError(f"Cannot read archive {path}: {e}") from e
