"""Statistical verification of the laws of large numbers and the central limit theorems.

Each ``verify_*`` function simulates an ensemble, forms the normalized
statistic of its regime and compares it with the limit variance computed by
:mod:`moments`.  Results are collected as :class:`Claim` records in a
:class:`VerificationReport`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import moments
from .errors import HorizonTooShort, TooFewSurvivors, WrongRegime
from .model import FiniteModel
from .simulator import DEFAULT_CAP, EnsembleStats, initial_counts, martingale_arrays, run_ensemble
from .spectral import (
    CRITICAL,
    LARGE,
    SMALL,
    SpectralDecomposition,
    block_regime,
    classify_function,
)
from .stats import (
    correlation,
    covariance_se,
    ks_distance,
    ks_threshold,
    mean_se,
    variance_se,
)

MIN_SURVIVORS = 100


@dataclass
class Claim:
    claim_id: str
    statement: str
    kind: str
    predicted: float | None
    observed: float | None
    standard_error: float | None
    distance: float | None
    tolerance: float
    passed: bool
    note: str = ""


@dataclass
class VerificationReport:
    title: str
    claims: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims)

    def add(self, claim: Claim) -> Claim:
        self.claims.append(claim)
        return claim

    def extend(self, other: "VerificationReport", prefix: str = "") -> None:
        for c in other.claims:
            d = asdict(c)
            d["claim_id"] = prefix + c.claim_id
            self.claims.append(Claim(**d))

    def claim(self, claim_id: str) -> Claim:
        for c in self.claims:
            if c.claim_id == claim_id:
                return c
        raise KeyError(claim_id)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "meta": self.meta,
            "claims": [{k: _plain(v) for k, v in asdict(c).items()} for c in self.claims],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_markdown(self) -> str:
        lines = [f"# {self.title}", ""]
        for k, v in self.meta.items():
            lines.append(f"- {k}: {v}")
        lines += [
            "",
            "| claim | statement | predicted | observed | SE | distance | tolerance | result |",
            "|---|---|---|---|---|---|---|---|",
        ]
        for c in self.claims:
            lines.append(
                f"| {c.claim_id} | {c.statement} | {_fmt(c.predicted)} | {_fmt(c.observed)} "
                f"| {_fmt(c.standard_error)} | {_fmt(c.distance)} | {_fmt(c.tolerance)} "
                f"| {'pass' if c.passed else 'FAIL'} |"
            )
        lines += ["", f"Overall: {'PASS' if self.passed else 'FAIL'}", ""]
        return "\n".join(lines)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.5g}"
    return str(v)


# ------------------------------------------------------------ individual checks


def check_variance(claim_id, statement, samples, predicted, k=4.0) -> Claim:
    x = np.real(np.asarray(samples))
    obs = float(x.var(ddof=1))
    se = variance_se(x)
    dist = abs(obs - predicted) / se if se > 0 else (0.0 if obs == predicted else math.inf)
    return Claim(claim_id, statement, "variance", float(predicted), obs, se, dist, k, bool(dist <= k))


def check_covariance(claim_id, statement, x, y, predicted, k=4.0) -> Claim:
    x, y = np.real(np.asarray(x)), np.real(np.asarray(y))
    obs = float(np.cov(x, y)[0, 1])
    se = covariance_se(x, y)
    dist = abs(obs - predicted) / se if se > 0 else (0.0 if obs == predicted else math.inf)
    return Claim(claim_id, statement, "covariance", float(predicted), obs, se, dist, k, bool(dist <= k))


def check_mean(claim_id, statement, samples, predicted, k=3.0) -> Claim:
    x = np.real(np.asarray(samples))
    obs = float(x.mean())
    se = mean_se(x)
    dist = abs(obs - predicted) / se if se > 0 else (0.0 if obs == predicted else math.inf)
    return Claim(claim_id, statement, "mean", float(predicted), obs, se, dist, k, bool(dist <= k))


def check_ks(claim_id, statement, samples, predicted_variance, threshold=None) -> Claim:
    x = np.real(np.asarray(samples))
    thr = ks_threshold(x.size) if threshold is None else float(threshold)
    d = ks_distance(x, predicted_variance)
    return Claim(claim_id, statement, "ks", float(predicted_variance), None, None, d, thr, bool(d < thr))


def check_uncorrelated(claim_id, statement, x, y, k=4.0) -> Claim:
    x, y = np.real(np.asarray(x)), np.real(np.asarray(y))
    r = correlation(x, y)
    tol = k / math.sqrt(x.size)
    return Claim(claim_id, statement, "correlation", 0.0, r, 1 / math.sqrt(x.size), abs(r), tol, bool(abs(r) < tol))


# ------------------------------------------------------------ survival


def default_survival_mode(model: FiniteModel) -> str:
    """``none`` when extinction is impossible (no deaths, no killing)."""
    if np.all(model.offspring[:, 0] == 0) and np.all(model.killing == 0):
        return "none"
    return "threshold"


def survival_filter(stats: EnsembleStats, mode: str = "none", eps: float = 0.0, t_index: int = -1) -> EnsembleStats:
    """Keep replicates with ``W`` above ``eps`` at the given checkpoint.

    ``mode="none"`` keeps everything.  Raises :class:`TooFewSurvivors` when
    fewer than 100 replicates remain.
    """
    if mode == "none":
        mask = np.ones(stats.counts.shape[0], bool)
    elif mode == "threshold":
        if "W" in stats.samples:
            W = np.asarray(stats.samples["W"])[:, t_index]
        else:
            W = stats.counts[:, t_index, :].sum(axis=1).astype(float)
        mask = W > eps
    else:
        raise ValueError(f"unknown survival mode {mode!r}")
    kept = int(mask.sum())
    if kept < MIN_SURVIVORS:
        raise TooFewSurvivors(f"only {kept} of {mask.size} replicates retained (need {MIN_SURVIVORS})")
    return stats.with_mask(mask, note=f"survival={mode} eps={eps} retained={kept}/{mask.size}")


# ------------------------------------------------------------ normalized statistics


def _counts(stats, t):
    return stats.counts[stats.mask, stats.index(t), :].astype(float)


def small_statistic(stats, decomp, f, t):
    """``<f, X_t> / sqrt(<phi1, X_t>)`` on retained replicates."""
    X = _counts(stats, t)
    return np.real(X @ np.asarray(f)) / np.sqrt(X @ decomp.phi1)


def critical_statistic(stats, decomp, h, t, tau, t_factor=True):
    """``<h, X_t> / sqrt(t^(1 + 2 tau) <phi1, X_t>)``; ``t_factor=False`` drops the extra ``t``."""
    X = _counts(stats, t)
    power = 1 + 2 * tau if t_factor else 2 * tau
    return np.real(X @ np.asarray(h)) / np.sqrt(t**power * (X @ decomp.phi1))


def large_statistic(stats, decomp, g, t, T_est):
    """``(<g, X_t> - E_t(g)) / sqrt(<phi1, X_t>)`` with ``H_inf`` replaced by ``H_{T_est}``."""
    X = _counts(stats, t)
    _, H = martingale_arrays(decomp, _counts(stats, T_est), T_est)
    centre = moments.E_t(decomp, H, g, t)
    return (np.real(X @ np.asarray(g)) - centre) / np.sqrt(X @ decomp.phi1)


def W_at(stats, decomp, t):
    return math.exp(decomp.lam1 * t) * (_counts(stats, t) @ decomp.phi1)


# ------------------------------------------------------------ helpers


def _profile(decomp, v, regime, name):
    p = classify_function(decomp, v)
    if p.regime != regime or math.isinf(p.gamma):
        raise WrongRegime(f"{name} must be a nonzero function in the {regime} regime (got {p.regime})")
    return p


def _large_gap(decomp, g):
    p = classify_function(decomp, g)
    blocks = [k for k, c in p.coefficients.items() if np.any(c != 0)]
    if not blocks or any(block_regime(decomp, decomp.block(k)) != LARGE for k in blocks):
        raise WrongRegime("g must be spanned by large-regime blocks")
    return decomp.lam1 - 2 * max(decomp.block(k).lam.real for k in blocks)


def _ensemble(model, decomp, nu, checkpoints, N, seed, threads, cap, survival, eps):
    stats = run_ensemble(model, decomp, nu, checkpoints[-1], None, N, seed,
                         checkpoints=checkpoints, threads=threads, cap=cap)
    mode = default_survival_mode(model) if survival == "auto" else survival
    return survival_filter(stats, mode, eps)


def _meta(model, seed, N, **kw):
    d = {"model_hash": model.hash(), "master_seed": int(seed), "replicates": int(N)}
    d.update({k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in kw.items()})
    return d


def _marginal(report, prefix, label, Z, predicted, ks_thr, W=None):
    report.add(check_variance(f"{prefix}.variance", f"{label}: variance matches the limit", Z, predicted))
    if predicted > 1e-12 * max(1.0, float(np.var(Z))):
        report.add(check_ks(f"{prefix}.ks", f"{label}: KS distance to the normal limit", Z, predicted, ks_thr))
    else:
        report.add(Claim(f"{prefix}.ks", f"{label}: degenerate prediction, normality not tested", "ks",
                         float(predicted), None, None, None, 0.0, True, note="degenerate"))
    if W is not None:
        report.add(check_uncorrelated(f"{prefix}.indep_W", f"{label}: uncorrelated with the martingale limit", Z, W))


def _pair(report, prefix, label, Z1, Z2, predicted, scale=1.0):
    """Covariance check; a pair whose predicted covariance vanishes also gets a correlation check."""
    report.add(check_covariance(f"{prefix}.covariance", f"{label}: covariance matches the limit form", Z1, Z2, predicted))
    if abs(predicted) <= 1e-9 * max(scale, 1e-300):
        report.add(check_uncorrelated(f"{prefix}.orthogonal", f"{label}: orthogonal pair is uncorrelated", Z1, Z2))


def _as_list(v) -> list:
    """``None``, one vector, or a sequence of vectors as a list of arrays."""
    if v is None:
        return []
    if np.ndim(v) == 1 and not isinstance(v[0], (list, tuple, np.ndarray)):
        return [np.asarray(v)]
    return [np.asarray(u) for u in v]


def _pair_id(prefix, i, others):
    return prefix if len(others) == 1 else f"{prefix}{i + 1}"


# ------------------------------------------------------------ verification


def verify_clt_small(model, decomp, f, nu, t, N, seed, f2=None, ks_threshold=None,
                     threads=1, cap=DEFAULT_CAP, survival="auto", eps=0.0, quad_cfg=None) -> VerificationReport:
    """Small-regime CLT for ``<f, X_t> / sqrt(<phi1, X_t>)``.

    ``f2`` is one function or a list of functions; each is paired with ``f``
    and the empirical covariance is checked against ``sigma(f, f2)``.
    """
    _profile(decomp, f, SMALL, "f")
    others = _as_list(f2)
    for i, v in enumerate(others):
        _profile(decomp, v, SMALL, f"f2[{i}]")
    sigma2 = moments.sigma_sq(decomp, model, f, quad_cfg)
    stats = _ensemble(model, decomp, nu, [t], N, seed, threads, cap, survival, eps)
    Z = small_statistic(stats, decomp, f, t)
    report = VerificationReport("small-regime CLT", meta=_meta(model, seed, N, t=t, retained=stats.N))
    _marginal(report, "small", "small regime", Z, sigma2, ks_threshold, W_at(stats, decomp, t))
    for i, v in enumerate(others):
        pred = moments.sigma_cross(decomp, model, f, v, quad_cfg)
        scale = math.sqrt(sigma2 * max(moments.sigma_sq(decomp, model, v, quad_cfg), 0.0))
        _pair(report, _pair_id("small.pair", i, others), "small regime pair", Z,
              small_statistic(stats, decomp, v, t), pred, scale)
    return report


def verify_clt_critical(model, decomp, h, nu, t, N, seed, h2=None, ks_threshold=None, negative_control=True,
                        threads=1, cap=DEFAULT_CAP, survival="auto", eps=0.0) -> VerificationReport:
    """Critical-regime CLT for ``<h, X_t> / sqrt(t^(1+2 tau) <phi1, X_t>)``.

    With ``negative_control`` the statistic without the extra ``t`` factor is
    also tested; the claim passes when that mis-normalized version is rejected.
    """
    p = _profile(decomp, h, CRITICAL, "h")
    rho2 = moments.rho_sq(decomp, model, h)
    stats = _ensemble(model, decomp, nu, [t], N, seed, threads, cap, survival, eps)
    Z = critical_statistic(stats, decomp, h, t, p.tau)
    report = VerificationReport("critical-regime CLT", meta=_meta(model, seed, N, t=t, tau=p.tau, retained=stats.N))
    _marginal(report, "critical", "critical regime", Z, rho2, ks_threshold, W_at(stats, decomp, t))
    if negative_control:
        Zc = critical_statistic(stats, decomp, h, t, p.tau, t_factor=False)
        c = check_variance("critical.control", "without the t factor", Zc, rho2)
        report.add(Claim("critical.control", "mis-normalized statistic (no t factor) is rejected", "control",
                         c.predicted, c.observed, c.standard_error, c.distance, c.tolerance, not c.passed))
    others = _as_list(h2)
    for i, v in enumerate(others):
        p2 = _profile(decomp, v, CRITICAL, f"h2[{i}]")
        # the pair normalization uses each function's own tau
        Z2 = critical_statistic(stats, decomp, v, t, p2.tau)
        scale = math.sqrt(rho2 * max(moments.rho_sq(decomp, model, v), 0.0))
        _pair(report, _pair_id("critical.pair", i, others), "critical regime pair", Z, Z2,
              moments.rho_cross(decomp, model, h, v), scale)
    return report


def verify_clt_large(model, decomp, g, nu, t, T_est=None, N=1000, seed=0, g2=None, ks_threshold=None,
                     horizon_factor=5.0, bias_check=True, threads=1, cap=DEFAULT_CAP, survival="auto",
                     eps=0.0, quad_cfg=None) -> VerificationReport:
    """Large-regime CLT for ``(<g, X_t> - E_t(g)) / sqrt(<phi1, X_t>)``.

    ``H_inf`` is replaced by ``H_{T_est}`` from the same trajectory; the
    default is ``T_est = t + 10 / gap``.  ``T_est`` below
    ``t + horizon_factor / gap`` raises :class:`HorizonTooShort`.  With
    ``bias_check`` the proxy sensitivity is measured by doubling ``T_est``.
    """
    others = _as_list(g2)
    gap = min([_large_gap(decomp, v) for v in [g] + others])
    if T_est is None:
        T_est = t + 10.0 / gap
    if T_est < t + horizon_factor / gap:
        raise HorizonTooShort(
            f"T_est={T_est:.6g} is below t + {horizon_factor:g}/gap = {t + horizon_factor / gap:.6g}"
        )
    beta2 = moments.beta_sq(decomp, model, g, quad_cfg)
    cps = [t, T_est, 2 * T_est] if bias_check else [t, T_est]
    stats = _ensemble(model, decomp, nu, cps, N, seed, threads, cap, survival, eps)
    Z = large_statistic(stats, decomp, g, t, T_est)
    report = VerificationReport("large-regime CLT", meta=_meta(model, seed, N, t=t, T_est=T_est, gap=gap, retained=stats.N))
    _marginal(report, "large", "large regime", Z, beta2, ks_threshold, W_at(stats, decomp, t))
    if bias_check:
        Z2 = large_statistic(stats, decomp, g, t, 2 * T_est)
        v1, v2 = float(np.var(Z, ddof=1)), float(np.var(Z2, ddof=1))
        se = variance_se(Z)
        report.add(Claim("large.proxy_bias", "doubling T_est shifts the variance by less than 1 SE", "bias",
                         v1, v2, se, abs(v2 - v1) / se if se > 0 else 0.0, 1.0, bool(abs(v2 - v1) < se)))
    for i, v in enumerate(others):
        scale = math.sqrt(beta2 * max(moments.beta_sq(decomp, model, v, quad_cfg), 0.0))
        _pair(report, _pair_id("large.pair", i, others), "large regime pair", Z,
              large_statistic(stats, decomp, v, t, T_est), moments.beta_cross(decomp, model, g, v, quad_cfg), scale)
    return report


def verify_joint(model, decomp, g, h, f, nu, t, N, seed, T_est=None, pairs=None, ks_threshold=None,
                 threads=1, cap=DEFAULT_CAP, survival="auto", eps=0.0, quad_cfg=None) -> VerificationReport:
    """Joint limit of ``(W, G_large(g), G_critical(h), G_small(f))`` from one ensemble.

    Any of ``g``, ``h``, ``f`` may be ``None``.  ``pairs`` optionally maps
    ``"f"``, ``"h"`` or ``"g"`` to a second function whose covariance with
    the first is checked against the corresponding cross form.
    """
    pairs = dict(pairs or {})
    if T_est is None:
        gaps = [_large_gap(decomp, v) for v in (g, pairs.get("g")) if v is not None]
        T_est = t + 10.0 / min(gaps) if gaps else t
    cps = [t] if T_est <= t else [t, T_est]
    stats = _ensemble(model, decomp, nu, cps, N, seed, threads, cap, survival, eps)
    # W_t stands in for W_inf: the large component is a martingale increment after t,
    # so it is uncorrelated with W_t at every finite horizon but not with W_{T_est}
    W = W_at(stats, decomp, t)
    report = VerificationReport("joint CLT", meta=_meta(model, seed, N, t=t, T_est=T_est, retained=stats.N))
    comps = {"W": W}
    if f is not None:
        _profile(decomp, f, SMALL, "f")
        Z = small_statistic(stats, decomp, f, t)
        var1 = moments.sigma_sq(decomp, model, f, quad_cfg)
        _marginal(report, "joint.small", "small component", Z, var1, ks_threshold)
        comps["small"] = Z
        if "f" in pairs:
            f2 = pairs["f"]
            _profile(decomp, f2, SMALL, "f2")
            scale = math.sqrt(var1 * max(moments.sigma_sq(decomp, model, f2, quad_cfg), 0.0))
            _pair(report, "joint.small_pair", "small pair", Z, small_statistic(stats, decomp, f2, t),
                  moments.sigma_cross(decomp, model, f, f2, quad_cfg), scale)
    if h is not None:
        p = _profile(decomp, h, CRITICAL, "h")
        Z = critical_statistic(stats, decomp, h, t, p.tau)
        var1 = moments.rho_sq(decomp, model, h)
        _marginal(report, "joint.critical", "critical component", Z, var1, ks_threshold)
        comps["critical"] = Z
        if "h" in pairs:
            h2 = pairs["h"]
            p2 = _profile(decomp, h2, CRITICAL, "h2")
            scale = math.sqrt(var1 * max(moments.rho_sq(decomp, model, h2), 0.0))
            _pair(report, "joint.critical_pair", "critical pair", Z, critical_statistic(stats, decomp, h2, t, p2.tau),
                  moments.rho_cross(decomp, model, h, h2), scale)
    if g is not None:
        _large_gap(decomp, g)
        Z = large_statistic(stats, decomp, g, t, T_est)
        var1 = moments.beta_sq(decomp, model, g, quad_cfg)
        _marginal(report, "joint.large", "large component", Z, var1, ks_threshold)
        comps["large"] = Z
        if "g" in pairs:
            g2 = pairs["g"]
            scale = math.sqrt(var1 * max(moments.beta_sq(decomp, model, g2, quad_cfg), 0.0))
            _pair(report, "joint.large_pair", "large pair", Z, large_statistic(stats, decomp, g2, t, T_est),
                  moments.beta_cross(decomp, model, g, g2, quad_cfg), scale)
    names = list(comps)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = names[i], names[j]
            report.add(check_uncorrelated(f"joint.indep.{a}_{b}", f"{a} and {b} components are uncorrelated",
                                          comps[a], comps[b]))
    return report


def verify_lln(model, decomp, f, nu, t_grid, N, seed, rotate=True, threshold=0.05,
               threads=1, cap=DEFAULT_CAP, survival="auto", eps=0.0) -> VerificationReport:
    """Mean-square convergence of the rescaled ``<f, X_t>`` to its martingale limit.

    At each ``t`` in ``t_grid`` the error
    ``E|t^-tau exp(Re_gamma t) <f, X_t> - sum_j exp(-i Im_j t) H_T^(j) F_j|^2``
    is estimated with ``T = max(t_grid)``.  Claims: non-increasing within 2 SE
    along the grid and a terminal error below ``threshold`` times the second
    moment of the limit.  ``rotate=False`` drops the phase factor.
    """
    p = _profile(decomp, f, LARGE, "f")
    grid = sorted(float(s) for s in t_grid)
    T = grid[-1]
    stats = _ensemble(model, decomp, nu, grid, N, seed, threads, cap, survival, eps)
    blocks = list(p.leading)
    _, H = martingale_arrays(decomp, _counts(stats, T), T, blocks)
    re = decomp.block(p.gamma).lam.real
    errs, ses = [], []
    for s in grid:
        X = _counts(stats, s)
        lhs = s ** (-p.tau) * math.exp(re * s) * (X @ np.asarray(f, dtype=complex))
        limit = 0
        for j in blocks:
            phase = np.exp(-1j * decomp.block(j).lam.imag * s) if rotate else 1.0
            limit = limit + phase * (H[j] @ p.leading[j])
        e = np.abs(lhs - limit) ** 2
        errs.append(float(e.mean()))
        ses.append(float(e.std(ddof=1) / math.sqrt(e.size)))
    scale = float(np.mean(np.abs(sum(H[j] @ p.leading[j] for j in blocks)) ** 2))
    report = VerificationReport("LLN", meta=_meta(model, seed, N, t_grid=grid, rotate=rotate, retained=stats.N))
    mono = all(errs[i + 1] <= errs[i] + 2 * math.hypot(ses[i], ses[i + 1]) for i in range(len(grid) - 1))
    report.add(Claim("lln.monotone", "mean-square error is non-increasing along the grid", "lln",
                     None, errs[-1], ses[-1], None, 2.0, mono, note=json.dumps(errs)))
    # the last grid point coincides with the estimation horizon, so judge the one before it
    k = max(0, len(grid) - 2)
    rel = errs[k] / scale if scale > 0 else 0.0
    report.add(Claim("lln.terminal", "relative mean-square error at the last pre-horizon point", "lln",
                     0.0, rel, ses[k] / scale if scale > 0 else None, rel, threshold, bool(rel < threshold)))
    return report


def verify_martingale_means(model, decomp, nu, t, N, seed, threads=1, cap=DEFAULT_CAP) -> VerificationReport:
    """Ensemble means of ``W_t`` and ``H_t^(k) b`` against ``phi1`` and ``Phi_k`` at the start."""
    stats = run_ensemble(model, decomp, nu, t, None, N, seed, checkpoints=[t], threads=threads, cap=cap)
    x0 = initial_counts(model, nu).astype(float)
    report = VerificationReport("martingale means", meta=_meta(model, seed, N, t=t))
    report.add(check_mean("mart.W", "mean of W_t equals <phi1, nu>", stats.samples["W"][:, 0], float(x0 @ decomp.phi1)))
    for k in decomp_blocks(stats):
        if k == 1:
            continue
        b = decomp.block(k)
        coef = np.ones(b.width)
        pred = x0 @ (b.Phi @ coef)
        obs = stats.samples[f"H{k}"][:, 0, :] @ coef
        report.add(check_mean(f"mart.H{k}.re", f"mean of Re H^({k}) b", obs.real, float(pred.real)))
        if b.lam.imag != 0:
            report.add(check_mean(f"mart.H{k}.im", f"mean of Im H^({k}) b", obs.imag, float(pred.imag)))
    return report


def decomp_blocks(stats) -> list:
    return sorted(int(k[1:]) for k in stats.samples if k.startswith("H"))


# ------------------------------------------------------------ null calibration


def null_calibration(runs: int = 100, N: int = 5000, seed: int = 0, ks_thr=None) -> VerificationReport:
    """Run each statistical check on samples drawn exactly from its null.

    A check passes calibration when it accepts at least 99% of the runs.
    """
    counts = {"variance": 0, "ks": 0, "correlation": 0, "covariance": 0, "mean": 0}
    for r in range(runs):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        var = 1.0 + rng.random()
        x = rng.normal(0.0, math.sqrt(var), N)
        y = rng.normal(0.0, 1.0, N)
        counts["variance"] += check_variance("v", "", x, var).passed
        counts["ks"] += check_ks("k", "", x, var, ks_thr).passed
        counts["correlation"] += check_uncorrelated("c", "", x, y).passed
        c = 0.5
        z = c * y + math.sqrt(1 - c * c) * rng.normal(0.0, 1.0, N)
        counts["covariance"] += check_covariance("cv", "", y, z, c).passed
        counts["mean"] += check_mean("m", "", x, 0.0).passed
    report = VerificationReport("null calibration", meta={"runs": runs, "N": N, "seed": seed})
    need = math.ceil(0.99 * runs)
    for name, ok in counts.items():
        report.add(Claim(f"null.{name}", f"{name} check accepts samples from its null", "calibration",
                         float(need), float(ok), None, None, float(need), bool(ok >= need)))
    return report


__all__ = [
    "Claim",
    "VerificationReport",
    "check_covariance",
    "check_ks",
    "check_mean",
    "check_uncorrelated",
    "check_variance",
    "null_calibration",
    "survival_filter",
    "verify_clt_critical",
    "verify_clt_large",
    "verify_clt_small",
    "verify_joint",
    "verify_lln",
    "verify_martingale_means",
]
