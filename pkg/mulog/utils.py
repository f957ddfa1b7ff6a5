import json
import logging
import os
import threading
from pathlib import Path
from typing import Any, Iterator, Mapping, Optional, Tuple

log = logging.getLogger(__name__)

# Pixel blocks handed to worker threads; fixed so results never depend on --threads
PIXEL_BLOCK = 4096


def setup_logging(loglevel: str = "INFO") -> None:
    logging.basicConfig(
        level=getattr(logging, (loglevel or "INFO").upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(message)s",
    )


def resolve_workers(workers: Optional[int], workers_auto: Optional[str] = None) -> int:
    """Return the number of worker threads to use.

    When ``workers`` is not given: 'half' uses ~50% of CPUs (default), 'full'
    uses all CPUs.
    """
    if workers is not None and workers > 0:
        return workers
    cpu = os.cpu_count() or 2
    auto_mode = (workers_auto or "half").strip().lower()
    if auto_mode not in {"half", "full"}:
        log.warning(f"Unknown workers mode '{workers_auto}', defaulting to 'half'")
        auto_mode = "half"
    return cpu if auto_mode == "full" else max(1, cpu // 2)


def iter_blocks(n: int, block: int = PIXEL_BLOCK) -> Iterator[Tuple[int, int]]:
    for start in range(0, n, block):
        yield start, min(n, start + block)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write via a temp file and replace, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    with open(tmp_path, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp_path, path)


class JsonLinesLog:
    """Append-only line-delimited JSON records, flushed as they are written."""

    def __init__(self, path: Optional[Path]) -> None:
        self.path = Path(path) if path is not None else None
        self.records: list = []
        self._lock = threading.Lock()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            # Start from an empty file for each run
            self.path.write_text("", encoding="utf-8")

    def append(self, record: Mapping[str, Any]) -> None:
        with self._lock:
            self.records.append(dict(record))
            if self.path is None:
                return
            try:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(record, sort_keys=True) + "\n")
                    f.flush()
                    os.fsync(f.fileno())
            except OSError as e:
                log.error(f"Unable to write diagnostics to {self.path}: {e}")
