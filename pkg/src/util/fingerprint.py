import hashlib

import numpy as np


def array_digest(*arrays: np.ndarray, tag: str = "") -> str:
    """Content hash of one or more arrays (dtype, shape and bytes)."""
    h = hashlib.sha256(tag.encode())
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        h.update(str(arr.dtype).encode())
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
