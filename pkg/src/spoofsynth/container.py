"""Self-describing array container used for checkpoints and SSL weights.

Layout::

    <header>\\n
    <json manifest>\\n
    <raw little-endian array bytes, concatenated in manifest order>

The manifest holds free-form metadata plus, per array, its name, dtype,
shape and byte offset.  Output is a pure function of the inputs, so a
load/save cycle reproduces the file byte for byte.
"""
import json
from pathlib import Path

import numpy as np

from .exceptions import BadFormat


def save_container(path, header, meta, arrays):
    entries, blobs, offset = [], [], 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        data = arr.tobytes()
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    manifest = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True,
                          ensure_ascii=True, allow_nan=True)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii") + b"\n")
        fh.write(manifest.encode("ascii") + b"\n")
        for blob in blobs:
            fh.write(blob)


def load_container(path, header):
    path = Path(path)
    if not path.is_file():
        raise BadFormat(f"no such file: {path}")
    with open(path, "rb") as fh:
        first = fh.readline().rstrip(b"\n")
        if first != header.encode("ascii"):
            raise BadFormat(f"{path}: expected header {header!r}, found {first[:40]!r}")
        try:
            manifest = json.loads(fh.readline())
        except (ValueError, UnicodeDecodeError) as exc:
            raise BadFormat(f"{path}: corrupt manifest: {exc}") from exc
        payload = fh.read()
    arrays = {}
    for e in manifest.get("arrays", []):
        end = e["offset"] + e["nbytes"]
        if end > len(payload):
            raise BadFormat(f"{path}: array {e['name']!r} is truncated")
        arr = np.frombuffer(payload[e["offset"]:end], dtype=np.dtype(e["dtype"]))
        arrays[e["name"]] = arr.reshape(e["shape"]).copy()
    return manifest.get("meta", {}), arrays


def state_dict_to_arrays(state_dict, prefix=""):
    return {f"{prefix}{k}": v.detach().cpu().numpy() for k, v in state_dict.items()}


def arrays_to_state_dict(arrays, prefix=""):
    import torch
    return {k[len(prefix):]: torch.from_numpy(v) for k, v in arrays.items() if k.startswith(prefix)}
