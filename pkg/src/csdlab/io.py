"""CSDF1 binary field dumps.

Layout: one ASCII header line ``CSDF1 n=<n> L=<L> rep=<pos|freq> comps=<1|2>``
terminated by ``\\n``, then the field values as little-endian float64
``(re, im)`` pairs in row-major order (component index slowest).  Frequency
dumps hold Fourier-series coefficients (transform normalized by ``1/n^2``).
``L`` is written with ``repr`` so the round trip is bit exact.
"""

from __future__ import annotations

import numpy as np

from .grid import FREQUENCY, POSITION, GridSpec, ScalarField, SpinorField

MAGIC = "CSDF1"
_REP_CODE = {POSITION: "pos", FREQUENCY: "freq"}
_REP_NAME = {v: k for k, v in _REP_CODE.items()}


def save_field(path, f) -> None:
    comps = 2 if isinstance(f, SpinorField) else 1
    header = f"{MAGIC} n={f.grid.n} L={f.grid.dom_half_width!r} rep={_REP_CODE[f.rep]} comps={comps}\n"
    data = np.ascontiguousarray(f.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes(order="C"))


def load_field(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        raw = fh.read()
    if not header or header[0] != MAGIC:
        raise ValueError(f"{path}: not a CSDF1 file")
    kv = dict(item.split("=", 1) for item in header[1:])
    n, L, comps = int(kv["n"]), float(kv["L"]), int(kv["comps"])
    rep = _REP_NAME[kv["rep"]]
    shape = (n, n) if comps == 1 else (comps, n, n)
    expected = 16 * int(np.prod(shape))
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} data bytes, found {len(raw)}")
    vals = np.frombuffer(raw, dtype="<c16").reshape(shape).astype(complex)
    grid = GridSpec(n, L)
    return ScalarField(grid, vals, rep) if comps == 1 else SpinorField(grid, vals, rep)
