"""On-disk cache for expensive artifacts (generating sets, resolutions)
and for CLI reports.

Keys hash the code version together with the defining parameters, so stale
entries are never reused across versions.  Writes go through a temporary
file and an atomic rename: concurrent readers are safe, and a crashed run
never leaves a partial entry.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from . import __version__


def cache_dir():
    d = os.environ.get("SUPEREXT_CACHE")
    if not d:
        d = os.path.join(os.getcwd(), ".superext_cache")
    os.makedirs(d, exist_ok=True)
    return d


def key_hash(*parts):
    h = hashlib.sha256()
    h.update(__version__.encode())
    for part in parts:
        h.update(b"\0")
        h.update(json.dumps(part, sort_keys=True, default=str).encode())
    return h.hexdigest()[:24]


def load_arrays(key):
    path = os.path.join(cache_dir(), key + ".npz")
    if not os.path.exists(path):
        return None
    try:
        with np.load(path, allow_pickle=False) as z:
            return {k: z[k] for k in z.files}
    except Exception:
        return None


def store_arrays(key, **arrays):
    path = os.path.join(cache_dir(), key + ".npz")
    fd, tmp = tempfile.mkstemp(dir=cache_dir(), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez_compressed(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_json(key):
    path = os.path.join(cache_dir(), key + ".json")
    if not os.path.exists(path):
        return None
    try:
        with open(path) as fh:
            return json.load(fh)
    except Exception:
        return None


def store_json(key, obj):
    path = os.path.join(cache_dir(), key + ".json")
    fd, tmp = tempfile.mkstemp(dir=cache_dir(), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(obj, fh, sort_keys=True, indent=1)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
