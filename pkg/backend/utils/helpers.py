import logging
import os
import tempfile
import uuid
from pathlib import Path
from typing import Dict, List, TextIO

from dotenv import load_dotenv

from services.errors import OutputError

load_dotenv()

logger = logging.getLogger(__name__)


def generate_run_id() -> str:
    """Unique id for one plan execution"""
    return str(uuid.uuid4())


def get_output_dir() -> Path:
    return Path(os.getenv("DILEMMALAB_OUTPUT_DIR", "results"))


def get_default_workers() -> int:
    raw = os.getenv("DILEMMALAB_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        logger.warning("DILEMMALAB_WORKERS=%r is not an integer, using 1", raw)
        return 1
    return max(1, workers)


def get_log_level() -> str:
    return os.getenv("DILEMMALAB_LOG_LEVEL", "INFO").upper()


def slow_tests_enabled() -> bool:
    return os.getenv("DILEMMALAB_SLOW_TESTS", "false").lower() == "true"


def format_real(value: float) -> str:
    """Six significant digits; negative zero prints as 0"""
    return f"{float(value) + 0.0:.6g}"


def format_pct(value: float) -> str:
    return f"{float(value):.1f}"


def cleanup_temp_files(temp_path: str):
    """Removes a leftover temporary file"""
    try:
        if temp_path and os.path.exists(temp_path):
            os.remove(temp_path)
    except OSError as e:
        logger.warning("Could not remove temporary file %s: %s", temp_path, e)


def _temp_in(path: Path) -> TextIO:
    path.parent.mkdir(parents=True, exist_ok=True)
    return tempfile.NamedTemporaryFile(
        mode="w", encoding="utf-8", newline="", dir=path.parent,
        prefix=f".{path.name}.", suffix=".tmp", delete=False,
    )


def atomic_write_text(path, text: str) -> Path:
    """Write to a temporary file next to `path`, then rename over it"""
    path = Path(path)
    temp_name = None
    try:
        with _temp_in(path) as handle:
            temp_name = handle.name
            handle.write(text)
        os.replace(temp_name, path)
    except OSError as e:
        cleanup_temp_files(temp_name)
        raise OutputError(path, e.strerror or str(e)) from e
    return path


class StagedOutputs:
    """
    Collects several output files as temporaries and renames them all at commit.
    discard() removes every temporary, so a failed run leaves nothing behind.
    """

    def __init__(self):
        self._staged: Dict[Path, str] = {}
        self._open: List[TextIO] = []

    def open(self, path) -> TextIO:
        path = Path(path)
        try:
            handle = _temp_in(path)
        except OSError as e:
            raise OutputError(path, e.strerror or str(e)) from e
        self._staged[path] = handle.name
        self._open.append(handle)
        return handle

    def write_text(self, path, text: str) -> None:
        handle = self.open(path)
        try:
            handle.write(text)
        except OSError as e:
            raise OutputError(path, e.strerror or str(e)) from e

    def commit(self) -> List[Path]:
        for handle in self._open:
            handle.close()
        written = []
        for path, temp_name in self._staged.items():
            try:
                os.replace(temp_name, path)
            except OSError as e:
                self.discard()
                raise OutputError(path, e.strerror or str(e)) from e
            written.append(path)
        self._staged.clear()
        self._open.clear()
        return written

    def discard(self) -> None:
        for handle in self._open:
            try:
                handle.close()
            except OSError:
                pass
        for temp_name in self._staged.values():
            cleanup_temp_files(temp_name)
        self._staged.clear()
        self._open.clear()
