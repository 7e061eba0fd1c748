"""Named models with declared spectral structure.

All designs put the constant function first in ``P`` so the leading growth
rate is the row sum of ``L``.  Models meant for central limit checks use the
``p123`` mechanism (no deaths) so that every replicate survives.
"""

from __future__ import annotations

import numpy as np

from .model import FiniteModel, JordanDesign, build_model, from_jordan_design

_OMEGA = np.exp(2j * np.pi / 3)
_CIRC_RE = np.array([1.0, _OMEGA.real, (_OMEGA**2).real])
_CIRC_IM = np.array([0.0, _OMEGA.imag, (_OMEGA**2).imag])
_HADAMARD = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]], dtype=float)


def yule(beta: float = 1.0) -> FiniteModel:
    """Single state, binary splitting at rate ``beta``."""
    return build_model({"Q": [[0.0]], "beta": beta, "offspring": [0.0, 0.0, 1.0]})


def critical_example() -> FiniteModel:
    """Two states with growth rates 2 and 1 (critical pairing), binary splitting at rate 2."""
    return from_jordan_design(
        JordanDesign(P=[[1, 2], [1, -1]], blocks=[(2.0, 1), (1.0, 1)], A_target=4.0, beta=2.0)
    )


def two_state(mu2: float, A=None, policy: str = "p123") -> FiniteModel:
    """Two symmetric states with growth rates 1 and ``mu2``.

    The second eigenfunction is ``(1, -1)`` and the switching rate in each
    direction is ``(1 - mu2) / 2``.
    """
    A = 2.0 if A is None else A
    return from_jordan_design(
        JordanDesign(P=[[1, 1], [1, -1]], blocks=[(1.0, 1), (mu2, 1)], A_target=A, beta_policy=policy, beta=2.0)
    )


def small_pair() -> FiniteModel:
    """Growth rates 0.7 and 0.1: the second eigenfunction is in the small regime.

    Pure binary splitting at rate 0.7 in both states.
    """
    return from_jordan_design(
        JordanDesign(P=[[1, 1], [1, -1]], blocks=[(0.7, 1), (0.1, 1)], A_target=1.4, beta_policy="p123", beta=0.7)
    )


def critical_pair() -> FiniteModel:
    """Growth rates 1 and 0.5 with unequal ``A``: critical second eigenfunction ``(1, -1)``."""
    return two_state(0.5, A=[2.4, 2.2])


def large_pair(mu2: float = 0.3) -> FiniteModel:
    """Growth rates 1 and ``mu2`` with unequal ``A`` (used with the leading eigenfunction)."""
    return two_state(mu2, A=[2.6, 2.2])


def large_block_pair() -> FiniteModel:
    """Growth rates 1 and 0.8 with unequal ``A``: the second eigenfunction is in the large regime."""
    return two_state(0.8, A=[2.6, 2.2])


def circulant(mu: complex, A=2.4) -> FiniteModel:
    """Three-state circulant with growth rates 1 and the conjugate pair ``mu``."""
    P = np.column_stack([np.ones(3), _CIRC_RE, _CIRC_IM])
    return from_jordan_design(JordanDesign(P=P, blocks=[(1.0, 1), (complex(mu), 1)], A_target=A, beta_policy="p123"))


def complex_example() -> FiniteModel:
    """Circulant with growth rates 1 and ``0.3 +- 0.4i`` (small regime pair)."""
    return circulant(0.3 + 0.4j)


def complex_critical() -> FiniteModel:
    """Circulant with growth rates 1 and ``0.5 +- 0.25i`` (critical pair)."""
    return circulant(0.5 + 0.25j)


def complex_large() -> FiniteModel:
    """Circulant with growth rates 1 and ``0.75 +- 0.14i`` (large regime pair)."""
    return circulant(0.75 + 0.14j)


def four_regimes() -> FiniteModel:
    """Four states with growth rates 1, 0.5, 0.3, 0.1: one block per regime boundary.

    The rate 0.5 block is critical and 0.3, 0.1 are small; the leading block
    supplies the large-regime component.
    """
    return from_jordan_design(
        JordanDesign(
            P=_HADAMARD,
            blocks=[(1.0, 1), (0.5, 1), (0.3, 1), (0.1, 1)],
            A_target=[2.2, 2.4, 2.6, 2.8],
            beta_policy="p123",
        )
    )


def jordan_three() -> FiniteModel:
    """Three states with growth rate 4 and a size-2 Jordan block at rate 1."""
    P = [[1.0, 1.0, 0.0], [1.0, -1.0, 1.0], [1.0, 0.0, -1.0]]
    return from_jordan_design(JordanDesign(P=P, blocks=[(4.0, 1), (1.0, 2)], A_target=9.0))


def jordan_large() -> FiniteModel:
    """Three states with growth rate 1 and a size-2 Jordan block at rate 0.6 (large regime).

    The short first chain vector keeps the nilpotent coupling small enough
    for ``L`` to stay nonnegative off the diagonal.
    """
    P = [[1.0, 0.1, 0.0], [1.0, -0.1, 1.0], [1.0, 0.0, -1.0]]
    return from_jordan_design(JordanDesign(P=P, blocks=[(1.0, 1), (0.6, 2)], A_target=[2.6, 2.4, 2.2],
                                           beta_policy="p123"))


def random_design(seed: int, n: int | None = None, complex_pair: bool = False, jordan2: bool = False,
                  max_rate: float = 8.0) -> JordanDesign:
    """Random feasible design with ``n`` states (2 to 6 when not given).

    ``P`` is the constant vector followed by random columns with zero sum, so
    the leading right eigenfunction is constant and the leading left one is
    uniform.  The leading growth rate is then chosen large enough to make
    every off-diagonal entry of ``L`` nonnegative; bases that would need a
    rate above ``max_rate`` are redrawn.  ``complex_pair`` adds a conjugate
    pair and ``jordan2`` a size-2 Jordan block.
    """
    rng = np.random.default_rng(seed)
    need = 1 + 2 * complex_pair + 2 * jordan2
    if n is None:
        n = int(rng.integers(max(2, need), 7))
    if n < need:
        raise ValueError(f"n={n} is too small for the requested blocks")
    rest = []
    if complex_pair:
        rest.append((complex(rng.uniform(-0.5, 0.5), rng.uniform(0.1, 0.5)), 1))
    if jordan2:
        rest.append((float(rng.uniform(-0.5, 0.5)), 2))
    used = 2 * complex_pair + 2 * jordan2
    rest += [(float(mu), 1) for mu in rng.uniform(-0.5, 0.5, size=n - 1 - used)]
    top = max(complex(mu).real for mu, _ in rest) if rest else 0.0
    # redraw the basis until the leading rate stays moderate, so exp(tL) is well scaled
    for _ in range(1000):
        V = rng.normal(size=(n, n - 1))
        V -= V.mean(axis=0)
        V /= np.linalg.norm(V, axis=0)
        if jordan2:
            # a short first chain vector keeps the nilpotent coupling small
            V[:, 2 * complex_pair] *= 0.3
        P = np.column_stack([np.ones(n), V])
        if np.linalg.cond(P) > 1e3:
            continue
        tail = JordanDesign(P=P, blocks=[(0.0, 1)] + rest, A_target=0.0).jordan_matrix()
        R = P @ tail @ np.linalg.inv(P)
        off = R - np.diag(np.diag(R))
        mu1 = max(n * (max(0.0, -off.min()) + 0.1), top + 0.5, 0.5)
        if mu1 <= max_rate:
            break
    else:
        raise RuntimeError("no feasible design found")
    # constants are eigenfunctions, so every row of L sums to mu1
    A = 2 * mu1 + 0.5
    return JordanDesign(P=P, blocks=[(mu1, 1)] + rest, A_target=A, beta_policy="p012", beta=mu1 + A + 1.0)


CATALOG = {
    "yule": yule,
    "critical_example": critical_example,
    "small_pair": small_pair,
    "critical_pair": critical_pair,
    "large_pair": large_pair,
    "large_block_pair": large_block_pair,
    "complex_example": complex_example,
    "complex_critical": complex_critical,
    "complex_large": complex_large,
    "four_regimes": four_regimes,
    "jordan_three": jordan_three,
    "jordan_large": jordan_large,
}


def named_model(name: str) -> FiniteModel:
    try:
        return CATALOG[name]()
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(CATALOG)}") from None
