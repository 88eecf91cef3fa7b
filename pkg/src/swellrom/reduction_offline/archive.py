"""Checksummed on-disk container for models and trajectory exports.

An archive is a directory holding one raw little-endian binary file
per array, optional text payloads, and a plain-text manifest listing
every entry with its dtype, shape and SHA-256 digest.  Writing is
deterministic (sorted entries, fixed float formatting), so identical
data produces byte-identical archives, and any corruption is caught
on load.
"""

import hashlib
import os

import numpy as np

from swellrom.errors import ChecksumMismatch, FormatVersionMismatch, ShapeMismatch

FORMAT_LINE = "swellrom-archive 1"
MANIFEST_NAME = "manifest.txt"

_DTYPES = {"f8": "<f8", "i8": "<i8"}


def _dtype_token(arr):
    if arr.dtype == np.float64:
        return "f8"
    if arr.dtype == np.int64:
        return "i8"
    raise ShapeMismatch(f"archives store float64 or int64, got {arr.dtype}")


def _digest(data):
    return hashlib.sha256(data).hexdigest()


def write_archive(path, meta, arrays, texts=None):
    """Write a manifest plus payload files under ``path``.

    Parameters
    ----------
    meta : dict of str to str
        Scalar metadata; keys must be whitespace-free, values must not
        contain newlines.
    arrays : dict of str to ndarray
        float64 or int64 arrays of any shape with at least one axis.
    texts : dict of str to str, optional
        Auxiliary text payloads (e.g. an embedded mesh).
    """
    texts = texts or {}
    os.makedirs(path, exist_ok=True)
    lines = [FORMAT_LINE]
    for key in sorted(meta):
        value = str(meta[key])
        if "\n" in value or any(ch.isspace() for ch in key):
            raise ShapeMismatch(f"bad metadata entry {key!r}")
        lines.append(f"meta {key}={value}")
    for name in sorted(texts):
        data = texts[name].encode("utf-8")
        fname = name + ".txt"
        with open(os.path.join(path, fname), "wb") as fh:
            fh.write(data)
        lines.append(f"text {name} {_digest(data)} {fname}")
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        token = _dtype_token(arr)
        if arr.ndim == 0:
            raise ShapeMismatch(f"array {name!r} must have at least one axis")
        data = arr.astype(_DTYPES[token], copy=False).tobytes()
        fname = name + ".bin"
        with open(os.path.join(path, fname), "wb") as fh:
            fh.write(data)
        shape = "x".join(str(s) for s in arr.shape)
        lines.append(f"array {name} {token} {shape} {_digest(data)} {fname}")
    with open(os.path.join(path, MANIFEST_NAME), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_archive(path):
    """Load and verify an archive; returns (meta, arrays, texts)."""
    manifest = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest):
        raise FormatVersionMismatch(f"no manifest under {path!r}")
    with open(manifest) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != FORMAT_LINE:
        head = lines[0] if lines else ""
        raise FormatVersionMismatch(
            f"expected format line {FORMAT_LINE!r}, found {head!r}"
        )

    meta = {}
    arrays = {}
    texts = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        kind, rest = line.split(" ", 1)
        if kind == "meta":
            key, value = rest.split("=", 1)
            meta[key] = value
        elif kind == "text":
            name, digest, fname = rest.split(" ")
            data = _read_payload(path, fname, digest, name)
            texts[name] = data.decode("utf-8")
        elif kind == "array":
            name, token, shape_s, digest, fname = rest.split(" ")
            if token not in _DTYPES:
                raise FormatVersionMismatch(f"unknown dtype token {token!r}")
            data = _read_payload(path, fname, digest, name)
            shape = tuple(int(s) for s in shape_s.split("x"))
            arrays[name] = np.frombuffer(data, dtype=_DTYPES[token]).reshape(
                shape
            ).copy()
        else:
            raise FormatVersionMismatch(f"unknown manifest entry {kind!r}")
    return meta, arrays, texts


def _read_payload(path, fname, digest, name):
    full = os.path.join(path, fname)
    if not os.path.isfile(full):
        raise ChecksumMismatch(f"payload {fname!r} for {name!r} is missing")
    with open(full, "rb") as fh:
        data = fh.read()
    if _digest(data) != digest:
        raise ChecksumMismatch(f"payload {fname!r} fails its digest")
    return data
