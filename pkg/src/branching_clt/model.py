"""Finite-state branching Markov models.

A model is the base chain generator ``Q`` (row deficits are killing rates),
a per-state branching rate ``beta`` and a per-state offspring law.  The mean
semigroup is generated by ``L = Q + diag(alpha)`` where ``alpha`` is the
branching drift and ``A`` the second factorial moment rate.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    EmptyState,
    InfeasibleDesign,
    InvalidLaw,
    NonGenerator,
    UnrealizableMechanism,
)

_TOL = 1e-12


class AssumptionWarning(UserWarning):
    """The reference measure is not sub-invariant for the base chain."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DeclaredBlock:
    """Spectral block whose structure was declared rather than inferred.

    ``mu`` is the generator eigenvalue (``-lambda_k``) and ``Phi`` holds the
    Jordan chains as columns, ordered so that ``L @ Phi = Phi @ J``.
    """

    mu: complex
    sizes: tuple
    Phi: np.ndarray


@dataclass(frozen=True, eq=False)
class FiniteModel:
    states: tuple
    m: np.ndarray
    Q: np.ndarray
    beta: np.ndarray
    offspring: np.ndarray
    alpha: np.ndarray
    A: np.ndarray
    L: np.ndarray
    K_bound: float
    declared: tuple | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def killing(self) -> np.ndarray:
        """Per-state rate of absorption at the cemetery."""
        return np.maximum(-self.Q.sum(axis=1), 0.0)

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "m": self.m.tolist(),
            "Q": self.Q.tolist(),
            "beta": self.beta.tolist(),
            "offspring": self.offspring.tolist(),
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _pad_laws(laws) -> np.ndarray:
    rows = [np.atleast_1d(np.asarray(p, dtype=float)) for p in laws]
    width = max(2, max(len(r) for r in rows))
    out = np.zeros((len(rows), width))
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    used = np.nonzero(out.any(axis=0))[0]
    last = max(2, int(used.max()) + 1 if used.size else 2)
    return out[:, :last]


def _mechanism_moments(beta, offspring):
    k = np.arange(offspring.shape[1])
    alpha = beta * (offspring @ k - 1.0)
    A = beta * (offspring @ (k * (k - 1.0)))
    return alpha, A


def _check_measure(m, Q):
    # sub-invariance m^T Q <= 0 is the finite-state form of the density bound
    drift = m @ Q
    if np.any(drift > 1e-9 * max(1.0, np.abs(Q).max())):
        warnings.warn(
            "reference measure m is not sub-invariant for Q (m^T Q has a positive entry)",
            AssumptionWarning,
            stacklevel=3,
        )


def build_model(config: Mapping[str, Any]) -> FiniteModel:
    """Validate a model description and derive ``alpha``, ``A`` and ``L``.

    ``config`` holds ``Q`` (n x n), ``beta`` (n), ``offspring`` (n laws
    ``[p0, p1, ...]``) and optionally ``m`` (defaults to ones) and ``states``.
    A scalar ``beta`` or a single offspring law is broadcast to all states.
    """
    try:
        Q = np.atleast_2d(np.asarray(config["Q"], dtype=float))
    except KeyError as exc:
        raise ConfigError(f"model config is missing {exc}") from None
    n = Q.shape[0]
    if n == 0 or Q.size == 0:
        raise EmptyState("model has no states")
    if Q.shape != (n, n):
        raise ConfigError(f"Q must be square, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise NonGenerator("Q has non-finite entries")

    scale = max(1.0, np.abs(Q).max())
    off = Q - np.diag(np.diag(Q))
    if np.any(off < -_TOL * scale):
        i, j = np.argwhere(off < -_TOL * scale)[0]
        raise NonGenerator(f"negative off-diagonal rate Q[{i},{j}] = {Q[i, j]}")
    rows = Q.sum(axis=1)
    if np.any(rows > 1e-10 * scale):
        i = int(np.argmax(rows))
        raise NonGenerator(f"positive row sum {rows[i]} at state {i}")
    off = np.maximum(off, 0.0)
    Q = off + np.diag(np.minimum(np.diag(Q), -off.sum(axis=1)))

    beta = np.broadcast_to(np.asarray(config.get("beta", 0.0), dtype=float), (n,)).copy()
    if np.any(beta < 0) or not np.all(np.isfinite(beta)):
        raise ConfigError("branching rate must be finite and nonnegative")

    laws = config.get("offspring", [[0.0, 1.0]])
    if np.ndim(laws) == 1 and not isinstance(laws[0], (list, tuple, np.ndarray)):
        laws = [laws] * n
    if len(laws) == 1 and n > 1:
        laws = list(laws) * n
    if len(laws) != n:
        raise InvalidLaw(f"expected {n} offspring laws, got {len(laws)}")
    offspring = _pad_laws(laws)
    if np.any(offspring < -_TOL) or not np.all(np.isfinite(offspring)):
        raise InvalidLaw("offspring probabilities must be nonnegative")
    sums = offspring.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        i = int(np.argmax(np.abs(sums - 1.0)))
        raise InvalidLaw(f"offspring law at state {i} sums to {sums[i]}")
    offspring = np.maximum(offspring, 0.0)
    offspring /= offspring.sum(axis=1, keepdims=True)

    m = np.asarray(config.get("m", np.ones(n)), dtype=float)
    if m.shape != (n,) or np.any(m <= 0) or not np.all(np.isfinite(m)):
        raise ConfigError("m must be n strictly positive finite weights")
    states = tuple(config.get("states", range(n)))
    if len(states) != n:
        raise ConfigError("states must have one label per row of Q")

    alpha, A = _mechanism_moments(beta, offspring)
    L = Q + np.diag(alpha)
    _check_measure(m, Q)
    return FiniteModel(
        states=states,
        m=_frozen(m),
        Q=_frozen(Q),
        beta=_frozen(beta),
        offspring=_frozen(offspring),
        alpha=_frozen(alpha),
        A=_frozen(A),
        L=_frozen(L),
        K_bound=float(np.max(np.abs(alpha) + A)),
        declared=config.get("_declared"),
    )


@dataclass(frozen=True)
class JordanDesign:
    """Declared spectral structure for a model with known Jordan data.

    ``blocks`` lists ``(mu, sizes)`` with ``mu`` a generator eigenvalue
    (growth rate, i.e. ``-lambda_k``).  A complex ``mu`` stands for the
    conjugate pair and consumes ``2 * sum(sizes)`` columns of ``P`` laid out
    as ``u1, v1, u2, v2, ...`` where ``u_j + i v_j`` is the j-th chain member
    for ``mu``.  A real ``mu`` consumes ``sum(sizes)`` columns.
    """

    P: Any
    blocks: Sequence
    A_target: Any
    m: Any = None
    states: Any = None
    beta_policy: str = "p012"
    beta: Any = None

    def jordan_matrix(self) -> np.ndarray:
        n = np.asarray(self.P).shape[0]
        J = np.zeros((n, n))
        c = 0
        for mu, sizes in self.blocks:
            mu = complex(mu)
            for d in _as_sizes(sizes):
                if mu.imag == 0.0:
                    for j in range(d):
                        J[c + j, c + j] = mu.real
                        if j + 1 < d:
                            J[c + j, c + j + 1] = 1.0
                    c += d
                else:
                    R = np.array([[mu.real, mu.imag], [-mu.imag, mu.real]])
                    for j in range(d):
                        s = c + 2 * j
                        J[s : s + 2, s : s + 2] = R
                        if j + 1 < d:
                            J[s : s + 2, s + 2 : s + 4] = np.eye(2)
                    c += 2 * d
        if c != n:
            raise ConfigError(f"design blocks use {c} columns but P has {n}")
        return J


def _as_sizes(sizes) -> tuple:
    if np.isscalar(sizes):
        sizes = (int(sizes),)
    sizes = tuple(int(d) for d in sizes)
    if not sizes or min(sizes) < 1:
        raise ConfigError("Jordan block sizes must be positive integers")
    return sizes


def _declared_blocks(P, blocks) -> tuple:
    out = []
    c = 0
    for mu, sizes in blocks:
        mu = complex(mu)
        sizes = _as_sizes(sizes)
        width = sum(sizes)
        if mu.imag == 0.0:
            Phi = P[:, c : c + width].astype(complex)
            out.append(DeclaredBlock(mu, sizes, Phi))
            c += width
        else:
            cols = P[:, c : c + 2 * width]
            Phi = cols[:, 0::2] + 1j * cols[:, 1::2]
            out.append(DeclaredBlock(mu, sizes, Phi))
            out.append(DeclaredBlock(mu.conjugate(), sizes, Phi.conj()))
            c += 2 * width
    return tuple(out)


def synthesize_mechanism(alpha, A, policy="p012", beta=None):
    """Return ``(beta, offspring)`` reproducing per-state ``alpha`` and ``A``.

    ``p012`` mixes 0, 1 and 2 offspring; ``p123`` mixes 1, 2 and 3 offspring
    (no deaths, so ``2 alpha <= A <= 3 alpha`` is required).  The branching
    rate is constant, ``max(alpha_+) + 1`` unless ``beta`` is given.
    """
    alpha = np.asarray(alpha, dtype=float)
    A = np.asarray(A, dtype=float)
    n = alpha.size
    if np.any(A < 0):
        raise UnrealizableMechanism("A must be nonnegative")
    if beta is None:
        beta = float(np.max(np.maximum(alpha, 0.0))) + 1.0
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (n,)).copy()
    if np.any(beta <= 0):
        raise UnrealizableMechanism("branching rate must be positive")
    tol = 1e-12
    if policy == "p012":
        p2 = A / (2 * beta)
        p0 = p2 - alpha / beta
        p1 = 1.0 - p0 - p2
        laws = np.column_stack([p0, p1, p2])
    elif policy == "p123":
        p3 = (A - 2 * alpha) / (2 * beta)
        p2 = (3 * alpha - A) / beta
        p1 = 1.0 - p2 - p3
        laws = np.column_stack([np.zeros(n), p1, p2, p3])
    else:
        raise ConfigError(f"unknown beta policy {policy!r}")
    if np.any(laws < -tol):
        i = int(np.argmin(laws.min(axis=1)))
        raise UnrealizableMechanism(
            f"policy {policy} needs negative weights at state {i} "
            f"(alpha={alpha[i]:.6g}, A={A[i]:.6g}, beta={beta[i]:.6g})"
        )
    return beta, np.maximum(laws, 0.0)


def from_jordan_design(design: JordanDesign) -> FiniteModel:
    """Realize ``L = P J P^{-1}`` as a conservative branching model."""
    P = np.asarray(design.P, dtype=float)
    n = P.shape[0]
    if n == 0:
        raise EmptyState("design has no states")
    if P.shape != (n, n):
        raise ConfigError("P must be square")
    if abs(np.linalg.det(P)) < 1e-12 * max(1.0, np.abs(P).max()) ** n:
        raise ConfigError("P is singular")
    J = design.jordan_matrix()
    L = P @ J @ np.linalg.inv(P)
    scale = max(1.0, np.abs(L).max())
    off = L - np.diag(np.diag(L))
    if np.any(off < -1e-10 * scale):
        i, j = np.argwhere(off < -1e-10 * scale)[0]
        raise InfeasibleDesign(f"L[{i},{j}] = {L[i, j]:.6g} is negative")
    off = np.maximum(off, 0.0)
    Q = off - np.diag(off.sum(axis=1))
    alpha = L.sum(axis=1)
    A = np.broadcast_to(np.asarray(design.A_target, dtype=float), (n,))
    beta, laws = synthesize_mechanism(alpha, A, design.beta_policy, design.beta)
    config = {
        "Q": Q,
        "beta": beta,
        "offspring": laws,
        "m": np.ones(n) if design.m is None else design.m,
        "states": range(n) if design.states is None else design.states,
        "_declared": _declared_blocks(P, design.blocks),
    }
    return build_model(config)


def design_from_dict(d: Mapping[str, Any]) -> JordanDesign:
    blocks = []
    for b in d["blocks"]:
        ev = b["eigenvalue"]
        mu = complex(ev[0], ev[1]) if isinstance(ev, (list, tuple)) else complex(ev)
        blocks.append((mu, tuple(b.get("sizes", (1,)))))
    return JordanDesign(
        P=np.asarray(d["P"], dtype=float),
        blocks=blocks,
        A_target=d["A_target"],
        m=d.get("m"),
        states=d.get("states"),
        beta_policy=d.get("beta_policy", "p012"),
        beta=d.get("beta"),
    )


def load_model(d: Mapping[str, Any]) -> FiniteModel:
    """Build a model from its JSON form (explicit or ``jordan_design``)."""
    if not isinstance(d, Mapping):
        raise ConfigError("model must be a JSON object")
    if "jordan_design" in d:
        try:
            return from_jordan_design(design_from_dict(d["jordan_design"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad jordan_design: {exc}") from None
    return build_model(d)


def is_irreducible(Q) -> bool:
    """Strong connectivity of the jump graph of ``Q``."""
    Q = np.asarray(Q)
    n = Q.shape[0]
    adj = (Q > 0) & ~np.eye(n, dtype=bool)
    reach = np.eye(n, dtype=bool) | adj
    # transitive closure by repeated squaring
    for _ in range(max(1, int(np.ceil(np.log2(max(n, 2)))))):
        reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
    return bool(reach.all())
