"""Exponential polynomials ``sum_i c_i s**p_i exp(mu_i s)``.

Every function of time built from the mean semigroup on a finite state space
has this form, so products, weighted sums and integrals over ``[0, inf)``
can be evaluated exactly.  Coefficients are either scalars or vectors over
the state space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import QuadratureFailure
from .spectral import SpectralDecomposition, m_norm


@dataclass(frozen=True, eq=False)
class ExpPoly:
    rates: np.ndarray  # complex (K,)
    powers: np.ndarray  # int (K,)
    coefs: np.ndarray  # complex (K,) or (K, n)

    def __len__(self):
        return len(self.rates)

    def __call__(self, s):
        s = float(s)
        w = s ** self.powers * np.exp(self.rates * s)
        return np.tensordot(w, self.coefs, axes=(0, 0))

    def conj(self) -> "ExpPoly":
        return ExpPoly(np.conj(self.rates), self.powers, np.conj(self.coefs))

    def shift(self, rate) -> "ExpPoly":
        """Multiply by ``exp(rate * s)``."""
        return ExpPoly(self.rates + rate, self.powers, self.coefs)

    def weight(self, w) -> "ExpPoly":
        return ExpPoly(self.rates, self.powers, self.coefs * np.asarray(w)[None, :])

    def reduce(self, w) -> "ExpPoly":
        """Scalar exponential polynomial ``sum_x coefs(x) w(x)``."""
        return ExpPoly(self.rates, self.powers, self.coefs @ np.asarray(w))

    def __mul__(self, other: "ExpPoly") -> "ExpPoly":
        rates = (self.rates[:, None] + other.rates[None, :]).ravel()
        powers = (self.powers[:, None] + other.powers[None, :]).ravel()
        if self.coefs.ndim == 1 and other.coefs.ndim == 1:
            coefs = (self.coefs[:, None] * other.coefs[None, :]).ravel()
        else:
            a = self.coefs if self.coefs.ndim == 2 else self.coefs[:, None]
            b = other.coefs if other.coefs.ndim == 2 else other.coefs[:, None]
            coefs = (a[:, None, :] * b[None, :, :]).reshape(len(rates), -1)
        return ExpPoly(rates, powers, coefs).compact()

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        return ExpPoly(
            np.concatenate([self.rates, other.rates]),
            np.concatenate([self.powers, other.powers]),
            np.concatenate([self.coefs, other.coefs]),
        ).compact()

    def compact(self, tol: float = 1e-12) -> "ExpPoly":
        """Merge terms with equal rate and power and drop zero terms."""
        if len(self) == 0:
            return self
        key_scale = tol * max(1.0, float(np.abs(self.rates).max()))
        keys = {}
        rates, powers, coefs = [], [], []
        for r, p, c in zip(self.rates, self.powers, self.coefs):
            k = (round(r.real / key_scale), round(r.imag / key_scale), int(p))
            if k in keys:
                coefs[keys[k]] = coefs[keys[k]] + c
            else:
                keys[k] = len(rates)
                rates.append(r)
                powers.append(p)
                coefs.append(c)
        coefs = np.array(coefs)
        mag = np.abs(coefs) if coefs.ndim == 1 else np.abs(coefs).max(axis=1)
        keep = mag > 1e-300
        if not keep.any():
            keep[0] = True
        return ExpPoly(np.array(rates)[keep], np.array(powers)[keep], coefs[keep])

    def integral(self) -> complex:
        """``int_0^inf`` of a scalar exponential polynomial."""
        total = 0.0 + 0.0j
        for r, p, c in zip(self.rates, self.powers, self.coefs):
            if c == 0:
                continue
            if r.real >= 0:
                raise QuadratureFailure(f"term with rate {r:.6g} does not decay")
            total += c * math.factorial(int(p)) / (-r) ** (p + 1)
        return total

    def tail_bound(self, T: float) -> float:
        """Upper bound on ``int_T^inf |h(s)| ds`` from the termwise moduli."""
        total = 0.0
        mags = np.abs(self.coefs) if self.coefs.ndim == 1 else np.abs(self.coefs).sum(axis=1)
        for r, p, c in zip(self.rates, self.powers, mags):
            if c == 0:
                continue
            d = -r.real
            if d <= 0:
                return math.inf
            total += c * math.gamma(p + 1) * gammaincc(p + 1, d * T) / d ** (p + 1)
        return float(total)


def _block_terms(decomp: SpectralDecomposition, f, sign: int, blocks=None, tol: float = 1e-10) -> ExpPoly:
    rates, powers, coefs = [], [], []
    # same zero cut as classify_function, so roundoff never adds a growing term
    cut = tol * m_norm(f, decomp.m)
    for b in decomp.blocks:
        if blocks is not None and b.index not in blocks:
            continue
        coeff = b.coefficients(f, decomp.m)
        v = np.where(np.abs(coeff) > cut, coeff, 0.0).astype(complex)
        for p in range(b.nu):
            term = b.Phi @ v / math.factorial(p) * (1.0 if sign < 0 else (-1.0) ** p)
            if np.any(term != 0):
                rates.append(sign * b.lam)
                powers.append(p)
                coefs.append(term)
            v = b.N @ v
    if not rates:
        n = len(decomp.m)
        return ExpPoly(np.zeros(1, complex), np.zeros(1, int), np.zeros((1, n), complex))
    return ExpPoly(np.array(rates, complex), np.array(powers), np.array(coefs))


def semigroup_poly(decomp: SpectralDecomposition, f) -> ExpPoly:
    """``s -> T_s f`` as a vector-valued exponential polynomial."""
    return _block_terms(decomp, f, -1)


def unwound_poly(decomp: SpectralDecomposition, g, blocks=None) -> ExpPoly:
    """``s -> sum_k exp(lam_k s) Phi_k D_k(-s) b_k`` over the given blocks."""
    return _block_terms(decomp, g, +1, blocks)


def apply_semigroup(decomp: SpectralDecomposition, h: ExpPoly) -> ExpPoly:
    """``u -> T_u[h(u)]`` for a vector-valued exponential polynomial ``h``."""
    out = None
    for r, p, c in zip(h.rates, h.powers, h.coefs):
        part = semigroup_poly(decomp, c)
        part = ExpPoly(part.rates + r, part.powers + p, part.coefs)
        out = part if out is None else out + part
    return out
