"""Writes the NIfTI-1 fixtures used by the CLI tests.

Independent of the Rust writer: headers are packed field by field with
`struct`, big-endian for the int16 file to exercise byte-order detection.
"""

import struct
from pathlib import Path

HERE = Path(__file__).resolve().parent


def header(endian, dims, datatype, bitpix, pixdim, slope, inter):
    h = bytearray(352)
    struct.pack_into(endian + "i", h, 0, 348)
    dim = [len(dims)] + list(dims) + [1] * (7 - len(dims))
    struct.pack_into(endian + "8h", h, 40, *dim)
    struct.pack_into(endian + "hh", h, 70, datatype, bitpix)
    pd = [1.0] + list(pixdim) + [1.0] * (7 - len(pixdim))
    struct.pack_into(endian + "8f", h, 76, *pd)
    struct.pack_into(endian + "fff", h, 108, 352.0, slope, inter)
    h[344:348] = b"n+1\0"
    return bytes(h)


def int16_scaled():
    # 6 x 5 image, value(x, y) = 10 * y + x - 7, stored as int16 with
    # slope 0.5 and intercept -2: physical value = 0.5 * raw - 2.
    w, h = 6, 5
    raw = [10 * y + x - 7 for y in range(h) for x in range(w)]
    body = struct.pack(">%dh" % len(raw), *raw)
    return header(">", (w, h), 4, 16, (2.0, 2.0), 0.5, -2.0) + body


def zero_spm():
    w, h = 16, 16
    body = struct.pack("<%df" % (w * h), *([0.0] * (w * h)))
    return header("<", (w, h), 16, 32, (1.0, 1.0), 1.0, 0.0) + body


if __name__ == "__main__":
    (HERE / "int16_scaled.nii").write_bytes(int16_scaled())
    (HERE / "zero_spm.nii").write_bytes(zero_spm())
