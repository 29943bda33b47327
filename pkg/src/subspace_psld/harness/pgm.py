"""Binary portable graymap (P5) reading and writing."""

from pathlib import Path

import numpy as np


def to_gray_levels(image: np.ndarray, vmin: float, vmax: float, bits: int = 8) -> np.ndarray:
    """Affinely map ``[vmin, vmax]`` onto ``[0, maxval]`` and clamp."""
    maxval = (1 << bits) - 1
    span = vmax - vmin if vmax > vmin else 1.0
    scaled = np.clip((np.asarray(image, dtype=float) - vmin) / span, 0.0, 1.0) * maxval
    return np.rint(scaled).astype(np.uint16 if bits == 16 else np.uint8)


def write_pgm(path, image: np.ndarray, vmin: float = 0.0, vmax: float = 1.0, bits: int = 8):
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM images must be 2-D")
    levels = to_gray_levels(image, vmin, vmax, bits)
    h, w = levels.shape
    header = f"P5\n{w} {h}\n{(1 << bits) - 1}\n".encode("ascii")
    # 16-bit samples are big-endian
    body = levels.astype(">u2").tobytes() if bits == 16 else levels.tobytes()
    Path(path).write_bytes(header + body)


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos].decode("ascii"))
    pos += 1
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != "P5":
        raise ValueError(f"not a binary PGM file: {magic}")
    dtype = ">u2" if maxval > 255 else np.uint8
    return np.frombuffer(data[pos:], dtype=dtype, count=w * h).reshape(h, w)
