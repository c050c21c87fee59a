"""Regenerates the MAT-file fixtures used by the ingest tests.

Little-endian files come from scipy.io.savemat; the big-endian file is written by hand
because scipy only writes native byte order.
"""
import struct

import numpy as np
import scipy.io

rng = np.random.default_rng(5)
de = rng.normal(size=(900, 1))
fe = rng.normal(size=(900, 1))

scipy.io.savemat("signal_le.mat", {"X097_DE_time": de, "X097_FE_time": fe, "X097RPM": np.array([[1796.0]])},
                 format="5", do_compression=False)
scipy.io.savemat("signal_compressed.mat", {"X097_DE_time": de}, format="5", do_compression=True)
scipy.io.savemat("matrix_le.mat", {"M_DE_time": np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])},
                 format="5", do_compression=False)
scipy.io.savemat("int_class.mat", {"Y_DE_time": np.arange(10, dtype=np.int32).reshape(10, 1)},
                 format="5", do_compression=False)

with open("signal_le.csv", "w") as f:
    f.write("DE_time\n")
    for v in de[:, 0]:
        f.write(repr(float(v)) + "\n")


def element(dtype, payload):
    pad = (-len(payload)) % 8
    return struct.pack(">II", dtype, len(payload)) + payload + b"\0" * pad


def big_endian_matrix(name, values):
    flags = element(6, struct.pack(">II", 6, 0))  # miUINT32, class mxDOUBLE
    dims = element(5, struct.pack(">ii", len(values), 1))
    nm = element(1, name.encode())
    real = element(9, struct.pack(">%dd" % len(values), *values))
    return element(14, flags + dims + nm + real)


header = b"MATLAB 5.0 MAT-file, big-endian fixture".ljust(116, b" ") + b"\0" * 8 + struct.pack(">H", 0x0100) + b"MI"
with open("signal_be.mat", "wb") as f:
    f.write(header + big_endian_matrix("X100_DE_time", [float(v) for v in de[:50, 0]]))
