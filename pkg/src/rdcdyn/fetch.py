"""Download client for PDB-format entries with an on-disk cache."""

from __future__ import annotations

import os
import re
import tempfile
import threading
import urllib.error
import urllib.request
from pathlib import Path

DEFAULT_BASE_URL = "https://files.rcsb.org/download/"
CACHE_ENV = "RDCDYN_CACHE"
NO_NETWORK_ENV = "RDCDYN_NO_NETWORK"
ACCESSION = re.compile(r"^[0-9][A-Za-z0-9]{3}$")

_write_lock = threading.Lock()


class FetchError(RuntimeError):
    """Network or server failure; the entry may still exist."""


class StructureNotFound(FetchError):
    """The repository answered that the entry does not exist."""


class NetworkDisabled(FetchError):
    pass


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "rdcdyn"


def validate_accession(entry_id: str) -> str:
    if not isinstance(entry_id, str) or not ACCESSION.match(entry_id):
        raise ValueError(f"invalid accession {entry_id!r}: expected 4 characters starting with a digit")
    return entry_id.upper()


def _network_disabled() -> bool:
    return os.environ.get(NO_NETWORK_ENV, "").lower() in ("1", "true", "yes")


def fetch_structure(entry_id: str, base_url: str = DEFAULT_BASE_URL, cache: Path | str | None = None,
                    no_network: bool = False, timeout: float = 30.0) -> str:
    """PDB-format text of an entry, from the cache when present, else downloaded and cached."""
    entry = validate_accession(entry_id)
    root = Path(cache) if cache is not None else cache_dir()
    path = root / f"{entry}.pdb"
    if path.exists():
        return path.read_text()
    if no_network or _network_disabled():
        raise NetworkDisabled(f"{entry} is not cached and network access is disabled")
    url = base_url.rstrip("/") + f"/{entry}.pdb"
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            text = resp.read().decode("utf-8", errors="replace")
    except urllib.error.HTTPError as exc:
        if exc.code in (404, 410):
            raise StructureNotFound(f"{entry} not found at {url}") from exc
        raise FetchError(f"HTTP {exc.code} fetching {url}") from exc
    except (urllib.error.URLError, OSError) as exc:
        raise FetchError(f"network failure fetching {url}: {exc}") from exc
    with _write_lock:
        root.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=root, suffix=".part")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    return text
