import sys
import json
import itertools
import zlib
import hashlib
import threading
import numpy as np
from pathlib import Path
from decimal import Decimal, ROUND_HALF_UP
from contextlib import contextmanager
from household_schooling.config import TOOL_VERSION

SPINNER = "|/-\\"


def safe_divide(num, den, fallback=None):
    try:
        return num / den
    except ZeroDivisionError:
        return fallback


def derive_rng(
    seed: int,
    label: str,
    index: int = 0,
    ) -> np.random.Generator:
    """
    Independent stream for (seed, label, index). The same triple always gives
    the same stream, whatever the scheduling of the callers.
    """
    label_key = zlib.crc32(label.encode("utf-8"))
    sequence = np.random.SeedSequence(int(seed), spawn_key=(label_key, int(index)))
    return np.random.Generator(np.random.PCG64(sequence))


def round_half_up(value: float) -> int:
    return int(Decimal(repr(float(value))).quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def file_digest(path: str | Path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


def provenance(
    seed: int,
    command: str,
    inputs: list[str | Path] = (),
    ) -> dict:
    return {
        "tool_version": TOOL_VERSION,
        "seed": int(seed),
        "command": command,
        "input_digests": {str(p): file_digest(p) for p in inputs},
    }


def to_jsonable(obj):
    """Recursively turn numpy containers and scalars into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(
    payload: dict,
    path: str | Path,
    ) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


@contextmanager
def loading_animation(
    initial_message: str = "Working...",
    enabled: bool = True,
    ):
    """
    Context manager that animates a status line on stderr and yields the
    status dictionary so callers can update the message.
    """
    status_data = {'message': initial_message}
    if not enabled or not sys.stderr.isatty():
        yield status_data
        return

    stop_event = threading.Event()
    animation_thread = threading.Thread(
        target=_animate_loading,
        args=(stop_event, status_data),
        daemon=True,
    )
    animation_thread.start()

    try:
        yield status_data
    finally:
        stop_event.set()
        animation_thread.join()


def _animate_loading(stop_event: threading.Event, status_data: dict):
    width = 0
    for frame in itertools.cycle(SPINNER):
        line = f"\r{frame} {status_data.get('message', '')}"
        sys.stderr.write(line.ljust(width))
        sys.stderr.flush()
        width = max(width, len(line))
        if stop_event.wait(0.2):
            break
    sys.stderr.write("\r" + " " * width + "\r")
    sys.stderr.flush()
