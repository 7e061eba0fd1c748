"""Exact event-driven simulation on occupancy vectors.

Particles in the same state are exchangeable, so the process is tracked by
its per-state counts.  Each state ``x`` fires at total rate
``counts[x] * (q_x + beta(x))``; a motion event moves one particle along a row
of ``Q`` (or to the cemetery on the row deficit) and a branching event
replaces one particle by ``k`` copies with probability ``p_k(x)``.

Replicate ``r`` of an ensemble draws from its own Philox stream keyed by
``(master_seed, r)``, so results do not depend on how replicates are spread
over threads.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numba
import numpy as np

from .errors import InvalidCheckpoint, NegativeTime, PopulationCap
from .model import FiniteModel
from .spectral import LARGE, SpectralDecomposition, block_polynomial, block_regime

DEFAULT_CAP = 10_000_000


@numba.njit(cache=True, nogil=True)
def _simulate_kernel(counts, move_rate, dest_cdf, beta, off_cdf, checkpoints, cap, rng, out, killed_out):
    n = counts.shape[0]
    C = checkpoints.shape[0]
    t = 0.0
    killed = 0
    ci = 0
    total = 0
    for x in range(n):
        total += counts[x]
    while True:
        R = 0.0
        for x in range(n):
            R += counts[x] * (move_rate[x] + beta[x])
        if R > 0.0:
            t_next = t - math.log(1.0 - rng.random()) / R
        else:
            t_next = math.inf
        while ci < C and checkpoints[ci] < t_next:
            for x in range(n):
                out[ci, x] = counts[x]
            killed_out[ci] = killed
            ci += 1
        if ci == C:
            return 0
        t = t_next
        # pick the firing state
        u = rng.random() * R
        x = 0
        acc = counts[0] * (move_rate[0] + beta[0])
        while acc <= u and x < n - 1:
            x += 1
            acc += counts[x] * (move_rate[x] + beta[x])
        v = rng.random() * (move_rate[x] + beta[x])
        if v < move_rate[x]:
            w = rng.random()
            y = 0
            while dest_cdf[x, y] <= w and y < n:
                y += 1
            counts[x] -= 1
            if y == n:
                killed += 1
                total -= 1
            else:
                counts[y] += 1
        else:
            w = rng.random()
            k = 0
            K = off_cdf.shape[1]
            while off_cdf[x, k] <= w and k < K - 1:
                k += 1
            counts[x] += k - 1
            total += k - 1
            if total > cap:
                return 1


@dataclass(frozen=True)
class _Tables:
    move_rate: np.ndarray
    dest_cdf: np.ndarray
    beta: np.ndarray
    off_cdf: np.ndarray


def _tables(model: FiniteModel) -> _Tables:
    Q = np.asarray(model.Q)
    n = model.n
    move = -np.diag(Q).copy()
    dest = np.zeros((n, n + 1))
    for x in range(n):
        row = np.maximum(Q[x].copy(), 0.0)
        row[x] = 0.0
        w = np.append(row, model.killing[x])
        if move[x] > 0:
            dest[x] = np.cumsum(w) / move[x]
        dest[x, -1] = 1.0 + 1e-12
    off = np.cumsum(model.offspring, axis=1)
    off[:, -1] = 1.0 + 1e-12
    return _Tables(move, dest, np.asarray(model.beta, dtype=float), off)


@dataclass(frozen=True, eq=False)
class ParticleSnapshot:
    time: float
    counts: np.ndarray
    killed_mass: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    checkpoints: tuple
    seed: int
    model_hash: str
    replicate: int | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.checkpoints])

    def at(self, t: float) -> ParticleSnapshot:
        for s, snap in self.checkpoints:
            if s == t:
                return snap
        raise KeyError(f"no checkpoint at time {t}")

    def write_csv(self, path, provenance: Mapping | None = None) -> None:
        """Counts per checkpoint; a leading ``#`` line carries the model hash, seed and ``provenance``."""
        n = len(self.checkpoints[0][1].counts) if self.checkpoints else 0
        tags = {"model_hash": self.model_hash, "seed": self.seed, **dict(provenance or {})}
        with open(path, "w", newline="") as fh:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in tags.items()) + "\n")
            w = csv.writer(fh)
            w.writerow(["time"] + [f"state_{i}_count" for i in range(n)] + ["killed"])
            for t, snap in self.checkpoints:
                w.writerow([repr(float(t))] + [int(c) for c in snap.counts] + [snap.killed_mass])


def replicate_generator(master_seed: int, replicate: int | None = None) -> np.random.Generator:
    """Philox stream for ``master_seed`` (and replicate index, if given)."""
    key = () if replicate is None else (int(replicate),)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(master_seed), spawn_key=key)))


def initial_counts(model, nu) -> np.ndarray:
    if np.isscalar(nu):
        v = np.zeros(model.n, dtype=np.int64)
        v[int(nu)] = 1
        return v
    v = np.asarray(nu)
    if v.shape != (model.n,) or np.any(v < 0) or np.any(v != np.round(v)):
        raise ValueError("initial configuration must be n nonnegative integer counts")
    return v.astype(np.int64)


def _checkpoints(t_end, checkpoints) -> np.ndarray:
    if t_end < 0:
        raise NegativeTime(f"t_end must be nonnegative, got {t_end}")
    cps = np.array([t_end] if checkpoints is None else list(checkpoints), dtype=float)
    if cps.size == 0:
        raise InvalidCheckpoint("at least one checkpoint is required")
    if np.any(np.diff(cps) <= 0):
        raise InvalidCheckpoint("checkpoint times must be strictly increasing")
    if cps[0] < 0 or cps[-1] > t_end:
        raise InvalidCheckpoint("checkpoints must lie in [0, t_end]")
    return cps


def _run(tables, counts0, cps, cap, rng):
    out = np.zeros((cps.size, counts0.size), dtype=np.int64)
    killed = np.zeros(cps.size, dtype=np.int64)
    status = _simulate_kernel(
        counts0.copy(), tables.move_rate, tables.dest_cdf, tables.beta, tables.off_cdf,
        cps, int(cap), rng, out, killed,
    )
    if status == 1:
        raise PopulationCap(f"population exceeded the cap of {cap} particles")
    return out, killed


def simulate(
    model: FiniteModel,
    nu,
    t_end: float,
    checkpoints=None,
    seed: int = 0,
    replicate: int | None = None,
    cap: int = DEFAULT_CAP,
) -> TrajectoryRecord:
    """Simulate one trajectory and record occupancies at ``checkpoints``."""
    cps = _checkpoints(t_end, checkpoints)
    out, killed = _run(_tables(model), initial_counts(model, nu), cps, cap, replicate_generator(seed, replicate))
    snaps = tuple(
        (float(t), ParticleSnapshot(float(t), out[i], int(killed[i]))) for i, t in enumerate(cps)
    )
    return TrajectoryRecord(snaps, int(seed), model.hash(), replicate)


def observe(snapshot, f):
    """``<f, X_t> = sum_x counts[x] f(x)``; also accepts raw count arrays."""
    counts = snapshot.counts if isinstance(snapshot, ParticleSnapshot) else np.asarray(snapshot)
    val = counts @ np.asarray(f)
    return val if np.ndim(val) else (complex(val) if np.iscomplexobj(val) else float(val))


@dataclass(frozen=True, eq=False)
class MartingaleReadout:
    W: float
    H: Mapping


def martingale_blocks(decomp: SpectralDecomposition) -> list:
    """Blocks whose martingale converges (``lam1 > 2 Re lam_k``)."""
    return [b.index for b in decomp.blocks if b.index == 1 or block_regime(decomp, b) == LARGE]


def martingale_arrays(decomp: SpectralDecomposition, counts, t: float, blocks=None):
    """``W_t`` and ``H_t^(k)`` for arrays of occupancy vectors (last axis = states)."""
    counts = np.asarray(counts, dtype=float)
    W = math.exp(decomp.lam1 * t) * (counts @ decomp.phi1)
    H = {}
    for k in martingale_blocks(decomp) if blocks is None else blocks:
        b = decomp.block(k)
        obs = counts @ b.Phi
        H[k] = np.exp(b.lam * t) * (obs @ block_polynomial(b, -t))
    return W, H


def martingales(decomp: SpectralDecomposition, snapshot: ParticleSnapshot) -> MartingaleReadout:
    W, H = martingale_arrays(decomp, snapshot.counts, snapshot.time)
    return MartingaleReadout(float(W), H)


# ------------------------------------------------------------ ensembles


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Replicate samples at the checkpoint times.

    ``counts`` has shape ``(N, C, n)``.  ``samples`` maps a statistic name to
    an array whose first axis is the replicate.  ``mask`` marks replicates
    retained by the survival filter; summary methods use retained ones only.
    """

    times: np.ndarray
    counts: np.ndarray
    killed: np.ndarray
    samples: dict
    mask: np.ndarray
    master_seed: int
    model_hash: str
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return int(self.mask.sum())

    @property
    def t(self) -> float:
        return float(self.times[-1])

    def index(self, t: float) -> int:
        hits = np.nonzero(np.isclose(self.times, t, rtol=1e-12, atol=0))[0]
        if not hits.size:
            raise KeyError(f"no checkpoint at time {t}")
        return int(hits[0])

    def retained(self, name: str) -> np.ndarray:
        return np.asarray(self.samples[name])[self.mask]

    def mean(self, name: str):
        return self.retained(name).mean(axis=0)

    def variance(self, name: str):
        return self.retained(name).var(axis=0, ddof=1)

    def covariance(self, names) -> np.ndarray:
        X = np.column_stack([np.real(self.retained(k)) for k in names])
        return np.atleast_2d(np.cov(X, rowvar=False))

    def with_samples(self, **arrays) -> "EnsembleStats":
        s = dict(self.samples)
        s.update(arrays)
        return EnsembleStats(self.times, self.counts, self.killed, s, self.mask,
                             self.master_seed, self.model_hash, self.note, self.extra)

    def with_mask(self, mask, note="") -> "EnsembleStats":
        return EnsembleStats(self.times, self.counts, self.killed, self.samples, np.asarray(mask, bool),
                             self.master_seed, self.model_hash, note or self.note, self.extra)

    def summary(self) -> dict:
        out = {
            **self.extra,
            "model_hash": self.model_hash,
            "master_seed": self.master_seed,
            "replicates": int(self.mask.size),
            "retained": self.N,
            "times": self.times.tolist(),
            "mean_counts": self.counts[self.mask].mean(axis=0).tolist(),
            "statistics": {},
        }
        for k, v in self.samples.items():
            v = np.asarray(v)[self.mask]
            if v.size == 0:
                continue
            entry = {"mean": _jsonable(v.mean(axis=0))}
            if len(v) > 1:
                entry["variance"] = _jsonable(v.var(axis=0, ddof=1))
            out["statistics"][k] = entry
        return out

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def _jsonable(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return {"re": v.real.tolist(), "im": v.imag.tolist()}
    return v.tolist()


def run_ensemble(
    model: FiniteModel,
    decomp: SpectralDecomposition | None,
    nu,
    t_end: float,
    statistics_spec: Mapping | None = None,
    N: int = 1000,
    master_seed: int = 0,
    checkpoints=None,
    threads: int = 1,
    cap: int = DEFAULT_CAP,
) -> EnsembleStats:
    """Run ``N`` independent replicates and collect statistics.

    ``statistics_spec`` maps a name to either a function on states (its
    pairing with the counts is recorded at every checkpoint, shape ``(N, C)``)
    or a callable ``(counts, times) -> array``.  When ``decomp`` is given the
    martingales ``W`` (``(N, C)``) and ``H<k>`` (``(N, C, n_k)``) are added.
    """
    if N < 2:
        raise ValueError("an ensemble needs at least two replicates")
    cps = _checkpoints(t_end, checkpoints)
    tables = _tables(model)
    counts0 = initial_counts(model, nu)
    counts = np.zeros((N, cps.size, model.n), dtype=np.int64)
    killed = np.zeros((N, cps.size), dtype=np.int64)

    def work(r):
        out, k = _run(tables, counts0, cps, cap, replicate_generator(master_seed, r))
        counts[r] = out
        killed[r] = k

    if threads <= 1:
        for r in range(N):
            work(r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for _ in pool.map(work, range(N)):
                pass

    samples = {}
    for name, spec in (statistics_spec or {}).items():
        if callable(spec):
            samples[name] = np.asarray(spec(counts, cps))
        else:
            samples[name] = counts @ np.asarray(spec)
    if decomp is not None:
        Ws, Hs = [], {}
        for i, t in enumerate(cps):
            W, H = martingale_arrays(decomp, counts[:, i, :], t)
            Ws.append(W)
            for k, v in H.items():
                Hs.setdefault(k, []).append(v)
        samples["W"] = np.stack(Ws, axis=1)
        for k, v in Hs.items():
            samples[f"H{k}"] = np.stack(v, axis=1)
    return EnsembleStats(cps, counts, killed, samples, np.ones(N, bool), int(master_seed), model.hash())

