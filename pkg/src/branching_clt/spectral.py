"""Spectral structure of the mean semigroup.

Blocks are indexed from 1 in order of increasing real part of the decay
rate ``lam = -mu`` where ``mu`` is an eigenvalue of the generator ``L``.
Within a block the columns of ``Phi`` are Jordan chains
``L phi_1 = mu phi_1``, ``L phi_{j+1} = mu phi_{j+1} + phi_j`` and ``Psi``
is the dual basis under ``<f, g>_m = sum f conj(g) m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg

from .errors import MissingBlock, NegativeTime, Reducible, TieUnresolved
from .expm import expm
from .model import FiniteModel, is_irreducible


def inner(f, g, m) -> complex:
    """Weighted inner product ``sum f * conj(g) * m`` over the state space."""
    return np.sum(np.asarray(f) * np.conj(g) * np.asarray(m))


def m_norm(f, m) -> float:
    return float(np.sqrt(np.sum(np.abs(np.asarray(f)) ** 2 * np.asarray(m))))


def mean_semigroup(model: FiniteModel, t: float, f):
    """``T_t f = exp(t L) f``; ``f`` may be a vector or a matrix of columns."""
    if t < 0:
        raise NegativeTime(f"time must be nonnegative, got {t}")
    return expm(t * model.L) @ np.asarray(f)


def adjoint_semigroup(model: FiniteModel, t: float, g):
    """Adjoint of ``T_t`` in the weighted space: ``M^-1 exp(t L^T) M g``."""
    if t < 0:
        raise NegativeTime(f"time must be nonnegative, got {t}")
    m = model.m
    g = np.asarray(g)
    mg = g * (m if g.ndim == 1 else m[:, None])
    out = expm(t * model.L.T) @ mg
    return out / (m if g.ndim == 1 else m[:, None])


def nilpotent(sizes) -> np.ndarray:
    """Shift matrix with ones on the superdiagonal inside each chain."""
    width = sum(sizes)
    N = np.zeros((width, width))
    c = 0
    for d in sizes:
        for j in range(d - 1):
            N[c + j, c + j + 1] = 1.0
        c += d
    return N


@dataclass(frozen=True, eq=False)
class SpectralBlock:
    index: int
    lam: complex
    sizes: tuple
    Phi: np.ndarray
    Psi: np.ndarray
    partner: int
    N: np.ndarray = field(repr=False)

    @property
    def nu(self) -> int:
        """Length of the longest chain."""
        return max(self.sizes)

    @property
    def width(self) -> int:
        return sum(self.sizes)

    @property
    def is_real(self) -> bool:
        return self.lam.imag == 0.0

    def coefficients(self, f, m) -> np.ndarray:
        """``(<f, psi_j>_m)_j`` for the chain members of this block."""
        f = np.asarray(f)
        return np.conj(self.Psi).T @ (f * m)


def block_polynomial(block: SpectralBlock, t: float) -> np.ndarray:
    """``D_k(t)``: block diagonal upper triangular Toeplitz with entries ``t^j / j!``."""
    D = np.eye(block.width)
    P = np.eye(block.width)
    for p in range(1, block.nu):
        P = P @ block.N
        D = D + (t**p / math.factorial(p)) * P
    return D


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    blocks: tuple
    m: np.ndarray
    Phi: np.ndarray
    Psi: np.ndarray
    declared: bool = False

    @property
    def lam1(self) -> float:
        return float(self.blocks[0].lam.real)

    @property
    def phi1(self) -> np.ndarray:
        return self.blocks[0].Phi[:, 0].real

    @property
    def psi1(self) -> np.ndarray:
        return self.blocks[0].Psi[:, 0].real

    @property
    def lams(self) -> np.ndarray:
        return np.array([b.lam for b in self.blocks])

    def block(self, k: int) -> SpectralBlock:
        if not 1 <= k <= len(self.blocks):
            raise MissingBlock(f"no spectral block {k} (have {len(self.blocks)})")
        return self.blocks[k - 1]

    def coefficients(self, f) -> dict:
        return {b.index: b.coefficients(f, self.m) for b in self.blocks}

    def semigroup(self, t: float, f):
        """``T_t f`` assembled from the spectral expansion."""
        f = np.asarray(f)
        out = np.zeros(f.shape, dtype=complex)
        for b in self.blocks:
            out += np.exp(-b.lam * t) * (b.Phi @ (block_polynomial(b, t) @ b.coefficients(f, self.m)))
        return out.real if not np.iscomplexobj(f) else out

    def biorthogonality_residual(self) -> float:
        G = self.Phi.T @ (self.m[:, None] * np.conj(self.Psi))
        return float(np.abs(G - np.eye(G.shape[0])).max())

    def to_dict(self) -> dict:
        return {
            "lambda_1": self.lam1,
            "blocks": [
                {
                    "index": b.index,
                    "lambda": [b.lam.real, b.lam.imag],
                    "sizes": list(b.sizes),
                    "partner": b.partner,
                    "Phi": {"re": b.Phi.real.tolist(), "im": b.Phi.imag.tolist()},
                    "Psi": {"re": b.Psi.real.tolist(), "im": b.Psi.imag.tolist()},
                }
                for b in self.blocks
            ],
            "biorthogonality_residual": self.biorthogonality_residual(),
        }


def deflated_generator(decomp: SpectralDecomposition, L, first: int) -> np.ndarray:
    """``L`` with the blocks before ``first`` projected out.

    On the span of the remaining blocks it acts as ``L``; removing the faster
    growing directions keeps roundoff from being amplified by ``exp(s L)``.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    proj = np.zeros((n, n), dtype=complex)
    for b in decomp.blocks[: max(0, int(first) - 1)]:
        proj += b.Phi @ (np.conj(b.Psi).T * decomp.m[None, :])
    return (L @ (np.eye(n) - proj)).real


# ---------------------------------------------------------------- inference


def _clusters(w, tol):
    """Single-linkage clustering of eigenvalues."""
    n = len(w)
    label = list(range(n))

    def root(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) <= tol:
                label[root(i)] = root(j)
    groups = {}
    for i in range(n):
        groups.setdefault(root(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def _null_basis(a, tol):
    _, s, vh = np.linalg.svd(a)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T


def _rank(vectors, tol):
    if not vectors:
        return 0
    s = np.linalg.svd(np.column_stack(vectors), compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def _jordan_chains(L, mu, mult, tol, scale):
    """Jordan chains for the eigenvalue cluster ``mu`` of multiplicity ``mult``."""
    n = L.shape[0]
    Nmat = L - mu * np.eye(n)
    kernels = [np.zeros((n, 0))]
    power = np.eye(n, dtype=complex)
    for j in range(1, mult + 1):
        power = power @ Nmat
        kernels.append(_null_basis(power, 1e-7 * max(scale, 1.0) ** j))
        if kernels[-1].shape[1] >= mult:
            break
    dims = [k.shape[1] for k in kernels]
    if dims[-1] != mult:
        raise TieUnresolved(
            f"cannot resolve Jordan structure near eigenvalue {mu:.6g}: "
            f"kernel dimensions {dims[1:]} do not reach multiplicity {mult}"
        )
    nu = len(dims) - 1
    dims.append(dims[-1])
    chains = []
    for j in range(nu, 0, -1):
        count = (dims[j] - dims[j - 1]) - (dims[j + 1] - dims[j])
        if count <= 0:
            continue
        # vectors already spanning level j: lower kernel plus images of longer chains
        span = [kernels[j - 1][:, i] for i in range(dims[j - 1])]
        for ch in chains:
            span.append(ch[len(ch) - j])
        base = _rank(span, 1e-8)
        picked = 0
        for i in range(kernels[j].shape[1]):
            v = kernels[j][:, i]
            if _rank(span + [v], 1e-8) > base:
                chain = [v]
                for _ in range(j - 1):
                    chain.insert(0, Nmat @ chain[0])
                chains.append(chain)
                span.append(v)
                base += 1
                picked += 1
                if picked == count:
                    break
        if picked != count:
            raise TieUnresolved(f"inconsistent Jordan chains near eigenvalue {mu:.6g}")
    chains.sort(key=len, reverse=True)
    sizes = tuple(len(c) for c in chains)
    Phi = np.column_stack([v for c in chains for v in c])
    return sizes, Phi


def _inferred_blocks(L, tol_factor=1e-8):
    scale = float(np.linalg.norm(L, 2))
    tol = tol_factor * max(scale, np.finfo(float).tiny)
    w, V = scipy.linalg.eig(L)
    out = []
    for g in _clusters(w, tol):
        mu = complex(np.mean(w[g]))
        if abs(mu.imag) <= tol:
            mu = complex(mu.real, 0.0)
        elif mu.imag < 0:
            continue
        if len(g) == 1:
            v = V[:, g[0]].astype(complex)
            sizes, Phi = (1,), v[:, None]
        else:
            sizes, Phi = _jordan_chains(L.astype(complex), mu, len(g), tol, scale)
        if mu.imag == 0.0:
            # a real eigenvalue has real chains; rotate to remove a common phase
            k = np.argmax(np.abs(Phi[:, 0]))
            Phi = Phi * (abs(Phi[k, 0]) / Phi[k, 0])
            if np.abs(Phi.imag).max() <= 1e-8 * np.abs(Phi).max():
                Phi = Phi.real.astype(complex)
            out.append((mu, sizes, Phi))
        else:
            out.append((mu, sizes, Phi))
            out.append((mu.conjugate(), sizes, Phi.conj()))
    n_found = sum(sum(s) for _, s, _ in out)
    if n_found != L.shape[0]:
        raise TieUnresolved("eigenvalue clusters do not pair into conjugates")
    return out, tol


def _order(raw, tol):
    """Sort by real part of ``lam``; on ties ``Im >= 0`` ascending, then conjugates."""
    items = [(complex(-mu.real, -mu.imag if mu.imag else 0.0), sizes, Phi) for mu, sizes, Phi in raw]
    items.sort(key=lambda it: it[0].real)
    ordered = []
    i = 0
    while i < len(items):
        j = i + 1
        while j < len(items) and abs(items[j][0].real - items[i][0].real) <= tol:
            j += 1
        group = items[i:j]
        group.sort(key=lambda it: (it[0].imag < -tol, abs(it[0].imag)))
        ordered.extend(group)
        i = j
    return ordered


def _check_ties(lams, tol=1e-10):
    z = np.exp(-np.asarray(lams))
    for i in range(len(z)):
        for j in range(i + 1, len(z)):
            if abs(z[i] - z[j]) <= tol * max(abs(z[i]), abs(z[j])):
                raise TieUnresolved(
                    f"blocks {i + 1} and {j + 1} have coincident exp(-lambda) "
                    f"({lams[i]:.6g}, {lams[j]:.6g})"
                )


def spectral_decompose(model: FiniteModel, tol: float = 1e-8) -> SpectralDecomposition:
    """Jordan decomposition of ``L`` with the dual basis and normalization.

    Declared designs keep their stated block structure.  Otherwise eigenvalues
    within ``tol * ||L||`` are clustered and chains are built from kernels of
    powers of ``L - mu``.  The leading eigenfunction is positive with unit
    weighted norm.
    """
    L = np.asarray(model.L, dtype=float)
    n = L.shape[0]
    if not is_irreducible(model.Q):
        raise Reducible("the base chain is not irreducible")
    if model.declared:
        raw = [(complex(b.mu), tuple(b.sizes), np.asarray(b.Phi, dtype=complex)) for b in model.declared]
        scale = float(np.linalg.norm(L, 2))
        tie_tol = tol * max(scale, np.finfo(float).tiny)
        declared = True
    else:
        raw, tie_tol = _inferred_blocks(L, tol)
        declared = False
    ordered = _order(raw, tie_tol)

    lam1, sizes1, Phi1 = ordered[0]
    if abs(lam1.imag) > 0 or sum(sizes1) != 1:
        raise Reducible("leading eigenvalue is not real and simple")
    if len(ordered) > 1 and ordered[1][0].real - lam1.real <= tie_tol:
        raise Reducible("leading eigenvalue is not separated from the rest of the spectrum")
    phi1 = Phi1[:, 0].real
    if phi1.sum() < 0:
        phi1 = -phi1
    if np.any(phi1 <= 1e-12 * np.abs(phi1).max()):
        raise Reducible("leading eigenfunction is not strictly positive")
    phi1 = phi1 / m_norm(phi1, model.m)
    ordered[0] = (complex(lam1.real, 0.0), sizes1, phi1[:, None].astype(complex))

    _check_ties([it[0] for it in ordered])

    P = np.column_stack([it[2] for it in ordered])
    if np.linalg.cond(P) > 1e12:
        raise TieUnresolved("eigenbasis is numerically singular")
    Psi_all = np.linalg.inv(P).conj().T / model.m[:, None]

    blocks = []
    c = 0
    lams = [it[0] for it in ordered]
    for k, (lam, sizes, Phi) in enumerate(ordered):
        w = sum(sizes)
        partner = k
        if lam.imag != 0.0:
            d = [abs(l - lam.conjugate()) if i != k else np.inf for i, l in enumerate(lams)]
            partner = int(np.argmin(d))
        blocks.append(
            SpectralBlock(
                index=k + 1,
                lam=complex(lam),
                sizes=tuple(sizes),
                Phi=Phi,
                Psi=Psi_all[:, c : c + w],
                partner=partner + 1,
                N=nilpotent(sizes),
            )
        )
        c += w
    return SpectralDecomposition(
        blocks=tuple(blocks),
        m=np.asarray(model.m, dtype=float),
        Phi=P,
        Psi=Psi_all,
        declared=declared,
    )


# ---------------------------------------------------------------- profiles

LARGE, CRITICAL, SMALL = "large", "critical", "small"


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Where a test function sits in the spectrum.

    ``gamma`` is the first block with a nonzero coefficient (``math.inf``
    for ``f == 0``), ``zeta`` the last block sharing its real part and
    ``tau`` the top polynomial degree over those blocks.  ``leading`` maps
    each block in ``gamma..zeta`` to ``N^tau b / tau!``.  ``projections``
    splits ``f`` by the regime of each block.
    """

    gamma: float
    zeta: float
    tau: int
    regime: str
    coefficients: Mapping
    leading: Mapping
    projections: Mapping

    def to_dict(self) -> dict:
        def enc(v):
            v = np.asarray(v)
            return {"re": v.real.tolist(), "im": v.imag.tolist()}

        return {
            "gamma": None if math.isinf(self.gamma) else int(self.gamma),
            "zeta": None if math.isinf(self.zeta) else int(self.zeta),
            "tau": self.tau,
            "regime": self.regime,
            "coefficients": {str(k): enc(v) for k, v in self.coefficients.items()},
            "leading": {str(k): enc(v) for k, v in self.leading.items()},
            "projections": {k: np.real(v).tolist() for k, v in self.projections.items()},
        }


def regime_tolerance(lam1: float) -> float:
    return 1e-8 * max(1.0, abs(lam1))


def block_regime(decomp: SpectralDecomposition, block: SpectralBlock) -> str:
    """Regime of a single block: compare ``2 Re lam_k`` with ``lam_1``."""
    gap = decomp.lam1 - 2.0 * block.lam.real
    tol = regime_tolerance(decomp.lam1)
    if gap > tol:
        return LARGE
    if gap < -tol:
        return SMALL
    return CRITICAL


def _degree(N, b, tol):
    deg = -1
    v = np.asarray(b, dtype=complex)
    p = 0
    while np.any(np.abs(v) > tol):
        deg = p
        v = N @ v
        p += 1
    return deg


def classify_function(decomp: SpectralDecomposition, f, tol: float = 1e-10) -> SpectralProfile:
    """Spectral profile of ``f``; coefficients below ``tol * ||f||`` count as zero."""
    f = np.asarray(f)
    norm = m_norm(f, decomp.m)
    cut = tol * norm
    coeffs = {}
    for b in decomp.blocks:
        c = b.coefficients(f, decomp.m)
        c = np.where(np.abs(c) > cut, c, 0.0)
        coeffs[b.index] = c

    nonzero = [k for k, c in coeffs.items() if np.any(c != 0)]
    projections = {LARGE: np.zeros(f.shape, dtype=complex), CRITICAL: np.zeros(f.shape, dtype=complex)}
    for b in decomp.blocks:
        r = block_regime(decomp, b)
        if r != SMALL:
            projections[r] = projections[r] + b.Phi @ coeffs[b.index]
    if not np.iscomplexobj(f):
        projections = {k: v.real for k, v in projections.items()}
    projections[SMALL] = f - projections[LARGE] - projections[CRITICAL]

    if not nonzero:
        return SpectralProfile(math.inf, math.inf, 0, SMALL, coeffs, {}, projections)

    gamma = min(nonzero)
    re = decomp.block(gamma).lam.real
    re_tol = regime_tolerance(decomp.lam1)
    zeta = gamma
    while zeta < len(decomp.blocks) and abs(decomp.block(zeta + 1).lam.real - re) <= re_tol:
        zeta += 1
    tau = max(_degree(decomp.block(j).N, coeffs[j], 0.0) for j in range(gamma, zeta + 1))
    leading = {}
    for j in range(gamma, zeta + 1):
        b = decomp.block(j)
        leading[j] = np.linalg.matrix_power(b.N, tau) @ coeffs[j] / math.factorial(tau)
    regime = block_regime(decomp, decomp.block(gamma))
    return SpectralProfile(gamma, zeta, tau, regime, coeffs, leading, projections)
