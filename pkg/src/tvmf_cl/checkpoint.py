"""Textual key-value checkpoint format for named tensors.

Layout (one tensor per block, whitespace separated):

    TVMF-CKPT-1
    tensor <name> <dtype> <ndim> <dim0> <dim1> ...
    <v0> <v1> ... <vk>          # flat row-major values on one line

``dtype`` is ``f8`` or ``i8``. Floats are written with 17 significant
digits so float64 values round-trip exactly. Tensor order is preserved.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

MAGIC = "TVMF-CKPT-1"

_DTYPES = {"f8": np.float64, "i8": np.int64}


def _dtype_tag(arr: np.ndarray) -> str:
    if np.issubdtype(arr.dtype, np.integer):
        return "i8"
    return "f8"


def write_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors to ``path`` in the TVMF-CKPT-1 format."""
    lines = [MAGIC]
    for name, arr in tensors.items():
        if " " in name:
            raise ValueError(f"tensor name may not contain spaces: {name!r}")
        arr = np.asarray(arr)
        tag = _dtype_tag(arr)
        dims = " ".join(str(d) for d in arr.shape)
        header = f"tensor {name} {tag} {arr.ndim}"
        if dims:
            header += f" {dims}"
        lines.append(header)
        flat = arr.ravel()
        if tag == "i8":
            lines.append(" ".join(str(int(v)) for v in flat))
        else:
            lines.append(" ".join(f"{float(v):.17g}" for v in flat))
    Path(path).write_text("\n".join(lines) + "\n")


def read_tensors(path) -> dict[str, np.ndarray]:
    """Read a TVMF-CKPT-1 file back into named numpy arrays."""
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != MAGIC:
        raise ValueError(f"not a {MAGIC} checkpoint: {path}")
    tensors: dict[str, np.ndarray] = {}
    i = 1
    while i < len(text):
        line = text[i].strip()
        i += 1
        if not line:
            continue
        parts = line.split()
        if parts[0] != "tensor" or len(parts) < 4:
            raise ValueError(f"malformed tensor header: {line!r}")
        name, tag, ndim = parts[1], parts[2], int(parts[3])
        if tag not in _DTYPES:
            raise ValueError(f"unknown dtype tag {tag!r}")
        shape = tuple(int(d) for d in parts[4 : 4 + ndim])
        if len(shape) != ndim:
            raise ValueError(f"malformed tensor header: {line!r}")
        count = int(np.prod(shape)) if shape else 1
        if i >= len(text):
            raise ValueError(f"missing values for tensor {name!r}")
        values = text[i].split()
        i += 1
        if len(values) != count:
            raise ValueError(
                f"tensor {name!r}: expected {count} values, got {len(values)}"
            )
        arr = np.array(values, dtype=_DTYPES[tag]).reshape(shape)
        tensors[name] = arr
    return tensors
