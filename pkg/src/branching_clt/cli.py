"""Command line front end.

Subcommands ``spectrum``, ``moments``, ``limits``, ``simulate`` and
``verify`` read a JSON experiment config and write JSON/CSV artifacts into
the output directory.  Exit status: 0 success, 1 configuration error,
2 mathematical or statistical failure, 3 input/output error.

Config layout (all keys optional except ``model``)::

    {
      "model": {...} | "path/to/model.json" | {"catalog": "small_pair"},
      "functions": {"f": [1, -1], "v": {"block": 2, "part": "re"}},
      "nu": 0,
      "t": [0.5, 1, 2],
      "N": 1000,
      "seed": 0,
      "output": "out",
      "moments": {"function": "f", "x": 0, "limit": "auto"},
      "simulate": {"t_end": 2.0, "checkpoints": [1.0, 2.0], "functions": ["f"]},
      "verify": [{"kind": "small", "f": "f", "t": 17.1, "N": 5000}]
    }

A function is a list of values or a spectral combination: one term or a
list of terms ``{"block": k, "column": j, "part": "re"|"im", "scale": c}``
taken from the right functions of the spectral decomposition.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import clt, moments
from .catalog import CATALOG
from .errors import BranchingError, ConfigError, WrongRegime
from .model import load_model
from .simulator import DEFAULT_CAP, run_ensemble, simulate
from .spectral import CRITICAL, LARGE, SMALL, classify_function, spectral_decompose

EXIT_OK, EXIT_CONFIG, EXIT_MATH, EXIT_IO = 0, 1, 2, 3


class IOFailure(Exception):
    """Unreadable input or unwritable output."""


# ------------------------------------------------------------ config handling


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``acceptance``, ``quick``, ``yule``)."""
    return Path(str(resources.files("branching_clt") / "configs" / f"{name}.json"))


def load_config(path) -> tuple[dict, Path]:
    """Read a config file; a bare bundled name such as ``acceptance`` is accepted too."""
    p = Path(path)
    if not p.exists() and not p.suffix and bundled_config(str(path)).exists():
        p = bundled_config(str(path))
    cfg = _read_json(p)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return cfg, p.parent


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def resolve_model(spec, base: Path):
    if isinstance(spec, str):
        spec = _read_json(base / spec)
    if isinstance(spec, dict) and "catalog" in spec:
        name = spec["catalog"]
        if name not in CATALOG:
            raise ConfigError(f"unknown catalog model {name!r}; choose from {sorted(CATALOG)}")
        return CATALOG[name]()
    if spec is None:
        raise ConfigError("config has no model")
    return load_model(spec)


def resolve_function(spec, functions: dict, decomp, model) -> np.ndarray:
    """Turn a name, a list of values or a spectral combination into a vector.

    ``{"sigma_orthogonal": a, "against": b}`` is ``a`` minus its projection
    on ``b`` in the small-regime covariance form, so the pair has zero
    limiting covariance.
    """
    n = model.n
    if isinstance(spec, str):
        if spec not in functions:
            raise ConfigError(f"unknown function {spec!r}")
        return resolve_function(functions[spec], functions, decomp, model)
    if isinstance(spec, dict) and "sigma_orthogonal" in spec:
        a = resolve_function(spec["sigma_orthogonal"], functions, decomp, model)
        b = resolve_function(spec["against"], functions, decomp, model)
        return a - moments.sigma_cross(decomp, model, a, b) / moments.sigma_sq(decomp, model, b) * b
    if isinstance(spec, dict):
        spec = [spec]
    if isinstance(spec, list) and spec and isinstance(spec[0], dict):
        out = np.zeros(n, dtype=complex)
        for term in spec:
            try:
                block = decomp.block(int(term["block"]))
            except KeyError as exc:
                raise ConfigError(f"bad spectral term {term}: {exc}") from None
            col = block.Phi[:, int(term.get("column", 0))]
            part = term.get("part", "re")
            if part == "re":
                col = col.real
            elif part == "im":
                col = col.imag
            elif part != "complex":
                raise ConfigError(f"part must be re, im or complex, got {part!r}")
            out = out + float(term.get("scale", 1.0)) * col
        return out.real if np.all(out.imag == 0) else out
    try:
        v = np.asarray(spec, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot read function {spec!r}") from None
    if v.shape != (n,):
        raise ConfigError(f"function needs {n} values, got shape {v.shape}")
    return v


def _times(values) -> list:
    ts = [float(t) for t in (values or [])]
    if any(t < 0 or not math.isfinite(t) for t in ts):
        raise ConfigError("t values must be finite and nonnegative")
    return ts


class Context:
    """Resolved config: model, decomposition, provenance and output directory."""

    def __init__(self, cfg: dict, base: Path, args):
        self.cfg = cfg
        self.base = base
        self.seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        self.N = args.replicates
        self.threads = max(1, int(args.threads or 1))
        self.out = Path(args.out or cfg.get("output", "out"))
        self.hash = config_hash(cfg)
        self._model = None
        self._decomp = None

    @property
    def model(self):
        if self._model is None:
            self._model = resolve_model(self.cfg.get("model"), self.base)
        return self._model

    @property
    def decomp(self):
        if self._decomp is None:
            self._decomp = spectral_decompose(self.model)
        return self._decomp

    def provenance(self) -> dict:
        return {"config_hash": self.hash, "master_seed": self.seed, "model_hash": self.model.hash()}

    def function(self, spec):
        return resolve_function(spec, self.cfg.get("functions", {}), self.decomp, self.model)

    def path(self, name) -> Path:
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IOFailure(f"cannot create {self.out}: {exc.strerror or exc}") from None
        return self.out / name

    def write_json(self, name, payload) -> Path:
        p = self.path(name)
        try:
            p.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")
        except OSError as exc:
            raise IOFailure(f"cannot write {p}: {exc.strerror or exc}") from None
        return p


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(f"cannot serialize {type(v).__name__}")


# ------------------------------------------------------------ spectrum


def design_for(model, decomp) -> dict:
    """A ``jordan_design`` reproducing the spectrum of ``model``.

    The mechanism keeps the model's ``A`` and branching rate when a standard
    policy can realize them and otherwise falls back to a binary mechanism
    with the same drift; the spectrum only depends on the drift.
    """
    cols, blocks = [], []
    for b in decomp.blocks:
        if b.is_real:
            cols.extend(b.Phi.real.T)
        elif b.lam.imag < 0:
            for j in range(b.width):
                cols.extend([b.Phi[:, j].real, b.Phi[:, j].imag])
        else:
            continue
        blocks.append({"eigenvalue": [-b.lam.real, -b.lam.imag], "sizes": list(b.sizes)})
    alpha = model.alpha
    candidates = [
        (model.A, model.beta, "p012"),
        (model.A, model.beta, "p123"),
        (2 * np.maximum(alpha, 0.0), np.full(model.n, np.abs(alpha).max() + 1.0), "p012"),
    ]
    from .model import synthesize_mechanism

    for A, beta, policy in candidates:
        try:
            synthesize_mechanism(alpha, A, policy, beta)
        except ConfigError:
            continue
        break
    return {
        "P": np.column_stack(cols).tolist(),
        "blocks": blocks,
        "A_target": np.asarray(A).tolist(),
        "beta": np.asarray(beta).tolist(),
        "beta_policy": policy,
        "m": model.m.tolist(),
        "states": list(model.states),
    }


def cmd_spectrum(ctx: Context) -> int:
    """Write the spectral decomposition to spectrum.json."""
    d = ctx.decomp
    payload = {
        **ctx.provenance(),
        "eigenvalues": [[b.lam.real, b.lam.imag] for b in d.blocks],
        "block_sizes": [list(b.sizes) for b in d.blocks],
        "phi1": d.phi1.tolist(),
        "psi1": d.psi1.tolist(),
        "biorthogonality_residual": d.biorthogonality_residual(),
        "decomposition": d.to_dict(),
        "jordan_design": design_for(ctx.model, d),
    }
    ctx.write_json("spectrum.json", payload)
    return EXIT_OK


# ------------------------------------------------------------ moments


def _limit_kind(decomp, f, requested):
    regime = classify_function(decomp, f).regime
    wanted = {"sigma": SMALL, "rho": CRITICAL, "beta": LARGE}
    if requested in (None, "none"):
        return None, regime
    if requested == "auto":
        return regime, regime
    if requested not in wanted:
        raise ConfigError(f"limit must be auto, none, sigma, rho or beta, got {requested!r}")
    if wanted[requested] != regime:
        raise WrongRegime(f"limit {requested} needs a {wanted[requested]}-regime function, got {regime}")
    return regime, regime


def cmd_moments(ctx: Context) -> int:
    """Sweep mean and variance over t into moments.csv."""
    mcfg = ctx.cfg.get("moments", {})
    ts = _times(mcfg.get("t", ctx.cfg.get("t", [])))
    x = int(mcfg.get("x", 0))
    if not 0 <= x < ctx.model.n:
        raise ConfigError(f"state index {x} out of range")
    rows = []
    if ts:
        d, model = ctx.decomp, ctx.model
        f = ctx.function(mcfg.get("function", "f"))
        kind, _ = _limit_kind(d, f, mcfg.get("limit", "auto"))
        profile = classify_function(d, f)
        predicted = None
        if kind == SMALL:
            predicted = moments.sigma_sq(d, model, f)
        elif kind == CRITICAL:
            predicted = moments.rho_sq(d, model, f)
        elif kind == LARGE:
            predicted = moments.var_H_infinity(d, model, f, x)[0]
        for t in ts:
            mean = complex(moments.first_moment(model, x, f, t))
            var = float(moments.variance(model, x, f, t))
            if kind == SMALL:
                norm = math.exp(d.lam1 * t) * var / d.phi1[x]
            elif kind == CRITICAL:
                norm = math.exp(d.lam1 * t) * var / (t ** (1 + 2 * profile.tau) * d.phi1[x]) if t > 0 else math.nan
            elif kind == LARGE:
                norm = float(moments.variance(model, x, moments.I_s(d, f, t), t))
            else:
                norm = math.nan
            rows.append([t, mean.real if mean.imag == 0 else mean, var, norm, predicted])
    p = ctx.path("moments.csv")
    try:
        with open(p, "w", newline="") as fh:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in ctx.provenance().items()) + f" x={x}\n")
            w = csv.writer(fh)
            w.writerow(["t", "mean", "variance", "normalized_variance", "predicted_limit"])
            for r in rows:
                w.writerow([_cell(v) for v in r])
    except OSError as exc:
        raise IOFailure(f"cannot write {p}: {exc.strerror or exc}") from None
    return EXIT_OK


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, complex):
        return repr(v)
    return repr(float(v))


# ------------------------------------------------------------ limits


def cmd_limits(ctx: Context) -> int:
    """Write limit variances of the configured functions to limits.json."""
    d, model = ctx.decomp, ctx.model
    out = {**ctx.provenance(), "lambda_1": d.lam1, "functions": {}}
    for name in ctx.cfg.get("functions", {}):
        f = ctx.function(name)
        profile = classify_function(d, f)
        entry = {"profile": profile.to_dict()}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", moments.DegenerateWarning)
            if math.isinf(profile.gamma):
                entry["limit"] = None
            elif profile.regime == SMALL:
                v, err = moments.sigma_sq(d, model, f, return_error=True)
                entry.update(limit="sigma_sq", value=v, error=err)
            elif profile.regime == CRITICAL:
                entry.update(limit="rho_sq", value=moments.rho_sq(d, model, f))
            else:
                try:
                    v, err = moments.beta_sq(d, model, f, return_error=True)
                    entry.update(limit="beta_sq", value=v, error=err)
                except WrongRegime as exc:
                    entry.update(limit=None, note=str(exc))
        out["functions"][name] = entry
    ctx.write_json("limits.json", out)
    return EXIT_OK


# ------------------------------------------------------------ simulate


def cmd_simulate(ctx: Context) -> int:
    """Run an ensemble; write ensemble.json and trajectory_0.csv."""
    scfg = ctx.cfg.get("simulate", {})
    t_end = float(scfg.get("t_end", max(_times(ctx.cfg.get("t", [1.0])) or [1.0])))
    cps = _times(scfg.get("checkpoints")) or None
    N = int(ctx.N or scfg.get("N", ctx.cfg.get("N", 100)))
    nu = scfg.get("nu", ctx.cfg.get("nu", 0))
    cap = int(scfg.get("cap", DEFAULT_CAP))
    stat_spec = {name: ctx.function(name) for name in scfg.get("functions", [])}
    stats = run_ensemble(ctx.model, ctx.decomp, nu, t_end, stat_spec, N, ctx.seed,
                         checkpoints=cps, threads=ctx.threads, cap=cap)
    stats.extra.update(ctx.provenance())
    p = ctx.path("ensemble.json")
    try:
        stats.write_json(p)
    except OSError as exc:
        raise IOFailure(f"cannot write {p}: {exc.strerror or exc}") from None
    record = simulate(ctx.model, nu, t_end, checkpoints=cps, seed=ctx.seed, replicate=0, cap=cap)
    p = ctx.path("trajectory_0.csv")
    try:
        record.write_csv(p, {"config_hash": ctx.hash})
    except OSError as exc:
        raise IOFailure(f"cannot write {p}: {exc.strerror or exc}") from None
    return EXIT_OK


# ------------------------------------------------------------ verify


def _entry_context(ctx: Context, entry: dict):
    if "model" not in entry:
        return ctx.model, ctx.decomp, lambda s: ctx.function(s)
    model = resolve_model(entry["model"], ctx.base)
    decomp = spectral_decompose(model)
    functions = {**ctx.cfg.get("functions", {}), **entry.get("functions", {})}
    return model, decomp, lambda s: resolve_function(s, functions, decomp, model)


def _fn_list(fn, spec):
    if spec is None:
        return None
    if isinstance(spec, list) and spec and isinstance(spec[0], (str, list)):
        return [fn(s) for s in spec]
    return fn(spec)


def run_verify_entry(ctx: Context, entry: dict, index: int) -> clt.VerificationReport:
    kind = entry.get("kind")
    seed = int(entry.get("seed", 0)) + ctx.seed
    if kind == "null_calibration":
        return clt.null_calibration(int(entry.get("runs", 100)), int(entry.get("N", 5000)), seed)
    model, decomp, fn = _entry_context(ctx, entry)
    N = int(ctx.N or entry.get("N", ctx.cfg.get("N", 1000)))
    nu = entry.get("nu", ctx.cfg.get("nu", 0))
    common = {"threads": ctx.threads, "cap": int(entry.get("cap", DEFAULT_CAP))}
    ks = entry.get("ks_threshold")
    if kind == "martingale_means":
        return clt.verify_martingale_means(model, decomp, nu, float(entry["t"]), N, seed, **common)
    if kind == "small":
        return clt.verify_clt_small(model, decomp, fn(entry["f"]), nu, float(entry["t"]), N, seed,
                                    f2=_fn_list(fn, entry.get("f2")), ks_threshold=ks, **common)
    if kind == "critical":
        return clt.verify_clt_critical(model, decomp, fn(entry["h"]), nu, float(entry["t"]), N, seed,
                                       h2=_fn_list(fn, entry.get("h2")), ks_threshold=ks,
                                       negative_control=bool(entry.get("negative_control", True)), **common)
    if kind == "large":
        return clt.verify_clt_large(model, decomp, fn(entry["g"]), nu, float(entry["t"]),
                                    T_est=entry.get("T_est"), N=N, seed=seed, g2=_fn_list(fn, entry.get("g2")),
                                    ks_threshold=ks, horizon_factor=float(entry.get("horizon_factor", 5.0)),
                                    bias_check=bool(entry.get("bias_check", True)), **common)
    if kind == "joint":
        pairs = {k: fn(v) for k, v in entry.get("pairs", {}).items()}
        return clt.verify_joint(model, decomp, _fn_list(fn, entry.get("g")), _fn_list(fn, entry.get("h")),
                                _fn_list(fn, entry.get("f")), nu, float(entry["t"]), N, seed,
                                T_est=entry.get("T_est"), pairs=pairs, ks_threshold=ks, **common)
    if kind == "lln":
        return clt.verify_lln(model, decomp, fn(entry["f"]), nu, _times(entry["t_grid"]), N, seed,
                              rotate=bool(entry.get("rotate", True)),
                              threshold=float(entry.get("threshold", 0.05)), **common)
    raise ConfigError(f"verify entry {index}: unknown kind {kind!r}")


def cmd_verify(ctx: Context) -> int:
    """Run the configured verification suite; write report.json and report.md."""
    entries = ctx.cfg.get("verify")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("config needs a non-empty 'verify' list")
    report = clt.VerificationReport(ctx.cfg.get("title", "verification"))
    report.meta.update({"config_hash": ctx.hash, "master_seed": ctx.seed})
    for i, entry in enumerate(entries):
        name = entry.get("name", f"{i + 1}.{entry.get('kind')}")
        sub = run_verify_entry(ctx, entry, i)
        report.meta[name] = sub.meta
        report.extend(sub, prefix=f"{name}:")
        print(f"{name}: {'pass' if sub.passed else 'FAIL'}", file=sys.stderr)
    ctx.write_json("report.json", report.to_dict())
    p = ctx.path("report.md")
    try:
        p.write_text(report.to_markdown())
    except OSError as exc:
        raise IOFailure(f"cannot write {p}: {exc.strerror or exc}") from None
    return EXIT_OK if report.passed else EXIT_MATH


# ------------------------------------------------------------ entry point

COMMANDS = {
    "spectrum": cmd_spectrum,
    "moments": cmd_moments,
    "limits": cmd_limits,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branching-clt",
        description="Spectra, moments, limit variances and CLT checks for finite-state branching Markov processes.",
        epilog="Exit status: 0 success, 1 configuration error, 2 mathematical or statistical failure, 3 I/O error.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="experiment config (JSON) or a bundled config name")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--replicates", type=int, default=None, help="replicates per ensemble (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, base = load_config(args.config)
        ctx = Context(cfg, base, args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", moments.DegenerateWarning)
            return COMMANDS[args.command](ctx)
    except IOFailure as exc:
        print(f"error: IOError: {exc}", file=sys.stderr)
        return EXIT_IO
    except BranchingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
