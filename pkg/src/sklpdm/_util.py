"""Small shared helpers (atomic file writes, float formatting)."""

import os
import tempfile


def atomic_write_text(path, text):
    """Write `text` to `path` via a temp file + rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def format_float(value):
    """Shortest decimal string that round-trips the float64 exactly."""
    return repr(float(value))
