"""Checkpoint storage for fitted models and reports."""

import json
import logging
import os
import tempfile
from pathlib import Path

from .errors import FormatError

logger = logging.getLogger(__name__)

CHECKPOINT_SUFFIX = ".checkpoint.json"


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd = None
    tmp_path = None
    try:
        fd = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        tmp_path = fd[1]
        with os.fdopen(fd[0], "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except OSError:
        logger.exception("Failed to write %s", path)
        if tmp_path and os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    return path


class CheckpointStore:
    """Store and retrieve model checkpoints as JSON documents in one directory."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def path_for(self, model: str) -> Path:
        return self.directory / f"{model}{CHECKPOINT_SUFFIX}"

    def save(self, model: str, doc: dict) -> Path:
        text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
        return atomic_write_text(self.path_for(model), text)

    def load(self, model: str) -> dict:
        return load_checkpoint(self.path_for(model))

    def exists(self, model: str) -> bool:
        return self.path_for(model).exists()


def load_checkpoint(path) -> dict:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not a valid checkpoint ({e})") from e
    if not isinstance(doc, dict) or "model" not in doc:
        raise FormatError(f"{path}: checkpoint has no 'model' field")
    return doc
