"""8-bit binary portable graymap (P5) reading and writing.

All image artifacts of the simulator (masks, frames, reconstructions) go
through this module. Only maxval <= 255 is supported; headers may contain
'#' comments per the PGM convention, though files written here never do.
"""

from __future__ import annotations

import numpy as np

from .errors import PgmFormatError


def write_pgm(path, image: np.ndarray) -> None:
    """Write a 2-D uint8 array as a binary P5 graymap."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise PgmFormatError(f"expected a 2-D image, got shape {img.shape}")
    if img.dtype != np.uint8:
        if img.min() < 0 or img.max() > 255:
            raise PgmFormatError("pixel values outside [0, 255]")
        img = img.astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 graymap into a 2-D uint8 array."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] != b"P5":
        raise PgmFormatError(f"{path}: not a P5 graymap (magic {data[:2]!r})")
    fields, pos = _header_tokens(data, n=3)
    try:
        w, h, maxval = (int(t) for t in fields)
    except ValueError:
        raise PgmFormatError(f"{path}: non-numeric header fields {fields}") from None
    if w <= 0 or h <= 0:
        raise PgmFormatError(f"{path}: bad dimensions {w}x{h}")
    if not 0 < maxval <= 255:
        raise PgmFormatError(f"{path}: unsupported maxval {maxval}")
    raster = data[pos : pos + w * h]
    if len(raster) < w * h:
        raise PgmFormatError(f"{path}: truncated raster ({len(raster)} of {w * h} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def _header_tokens(data: bytes, n: int):
    """Pull n whitespace-separated tokens after the magic, skipping # comments.

    Returns the tokens and the offset of the first raster byte (one single
    whitespace character after the last header token, per the format).
    """
    tokens = []
    pos = 2
    while len(tokens) < n:
        if pos >= len(data):
            raise PgmFormatError("truncated header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise PgmFormatError("unterminated header comment")
            pos = nl + 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    return tokens, pos + 1
