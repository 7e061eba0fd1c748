"""Matrix exponential by scaling and squaring with a fixed degree-13 Padé approximant.

The coefficients and the scaling threshold are the standard ones for the
[13/13] diagonal approximant; with ``||A||_1 / 2**s <= THETA_13`` the backward
error is below double-precision unit roundoff.
"""

import math

import numpy as np

_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
THETA_13 = 5.371920351148152


def expm(a):
    """Return ``exp(a)`` for a square real or complex matrix."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expm expects a square matrix")
    if not np.iscomplexobj(a):
        a = a.astype(float)
    n = a.shape[0]
    if n == 0:
        return a.copy()
    norm = np.linalg.norm(a, 1)
    if not np.isfinite(norm):
        raise ValueError("matrix has non-finite entries")
    if norm == 0.0:
        return np.eye(n, dtype=a.dtype)
    s = 0
    if norm > THETA_13:
        s = int(math.ceil(math.log2(norm / THETA_13)))
    a = a / (2.0 ** s)

    b = _PADE13
    ident = np.eye(n, dtype=a.dtype)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    )
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def expm_action(a, t, f):
    """Return ``exp(t a) f`` for a vector or a matrix of column vectors."""
    return expm(t * np.asarray(a)) @ np.asarray(f)
