"""Batch entry point: ``csdlab --config run.cfg --output out/``.

Config files are flat ``key = value`` lines with dotted sections, ``#``
comments and comma-separated lists, e.g.::

    command = simulate
    grid.n = 64
    evolution.T = 0.5
    evolution.m = 1

Unknown keys are errors.  Every artifact written by a run is listed, with its
sha256, in the plain-text ``manifest.txt`` of the output directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import platform
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import scipy.fft as sfft

from . import __version__
from .dirac_algebra import (algebra_residuals, commutator_residual, projection_product_norm,
                            projection_product_norm_svd, projection_residuals, riesz_identity_residual)
from .errors import ConfigError, CSDError
from .estimates_lab import (bilinear_constant_probe, default_bilinear_configs, default_nullform_configs,
                            interaction_floor, interaction_probe, nullform_constant_probe, write_reports)
from .evolution import (EvolutionConfig, contraction_threshold, evolve, picard_sequence,
                        smooth_random_spinor)
from .grid import GridSpec, as_position, is_power_of_two, sobolev_norm
from .illposedness import IllposedConfig, lambda_sweep
from .io import save_field
from .nonlinearity import (cs_gauss_residual, gauge_potential, meanfree_charge_density_norm,
                           nonlinear_term, nonlinear_term_gamma_form)

COMMANDS = ("simulate", "picard", "probe-bilinear", "probe-nullform", "probe-interaction",
            "illposed-sweep", "identities")

EXIT_CODES = {"ok": 0, "internal": 1, "config": 2, "io": 3, "numerical": 4, "quadrature": 4,
              "domain": 5, "representation": 5, "grid": 5, "identity": 6}

MANIFEST = "manifest.txt"


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _floats(v: str) -> tuple:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _seed(v: str) -> int:
    s = int(v, 0)
    if not 0 <= s < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {v}")
    return s


# key -> (parser, default); a default of ``...`` marks a required key
SCHEMA = {
    "command": (str, ...),
    "seed": (_seed, 0),
    "grid.n": (int, 64),
    "grid.L": (float, float(np.pi) * 2),
    "evolution.m": (float, 0.0),
    "evolution.T": (float, ...),
    "evolution.n_steps": (int, 32),
    "evolution.n_quad": (int, 5),
    "evolution.amp": (float, None),
    "evolution.sigma": (float, 2.0),
    "evolution.hs": (_floats, (0.0, 0.25)),
    "evolution.s": (float, 0.25),
    "evolution.nonlinear": (_bool, True),
    "evolution.n_iter": (int, 6),
    "evolution.snapshots": (_floats, ()),
    "illposed.lambdas": (_floats, ...),
    "illposed.eps": (float, ...),
    "illposed.delta": (float, ...),
    "illposed.s": (float, ...),
    "illposed.n_quad": (int, 17),
    "illposed.n_times": (int, 4),
    "probe.n_trials": (int, None),
    "probe.n_samples": (int, 100_000),
}

SECTIONS = {
    "simulate": ("grid", "evolution"),
    "picard": ("grid", "evolution"),
    "probe-bilinear": ("probe",),
    "probe-nullform": ("probe",),
    "probe-interaction": ("probe",),
    "illposed-sweep": ("illposed",),
    "identities": (),
}


class ConfigWarning(UserWarning):
    """A config entry was accepted but has no effect."""


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    grid: GridSpec | None = None
    evolution: EvolutionConfig | None = None
    illposed: tuple = ()                 # one IllposedConfig per lambda
    probe: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    output_dir: Path = Path("csdlab-out")
    warnings: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    def canonical_text(self) -> str:
        return "".join(f"{k} = {self.values[k]!r}\n" for k in sorted(self.values))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def _section(key: str) -> str:
    return key.split(".", 1)[0] if "." in key else ""


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config; raises :class:`ConfigError` listing every problem."""
    errors, raw, unparsed = [], {}, set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in raw:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {raw[key][0]})")
            continue
        parser = SCHEMA[key][0]
        try:
            raw[key] = (lineno, parser(val))
        except ValueError as exc:
            unparsed.add(key)
            errors.append(f"line {lineno}: {key}: cannot parse {val!r} as {parser.__name__.lstrip('_')} ({exc})")

    command = raw.get("command", (0, None))[1]
    if command is None:
        errors.append("command: missing required key")
        raise ConfigError(errors)
    if command not in COMMANDS:
        errors.append(f"line {raw['command'][0]}: command: {command!r} is not one of {', '.join(COMMANDS)}")
        raise ConfigError(errors)

    active = SECTIONS[command]
    cfg = RunConfig(command)
    ignored = sorted({_section(k) for k in raw if _section(k) and _section(k) not in active})
    for sec in ignored:
        msg = f"{sec}.* keys are not used by command {command!r} and were ignored"
        cfg.warnings.append(msg)
        warnings.warn(msg, ConfigWarning, stacklevel=2)

    vals = {}
    for key, (_, default) in SCHEMA.items():
        sec = _section(key)
        if sec and sec not in active:
            continue
        if key in raw:
            vals[key] = raw[key][1]
        elif key in unparsed:
            continue
        elif default is ...:
            errors.append(f"{key}: missing required key for command {command!r}")
        else:
            vals[key] = default

    def build(name, fn):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            msgs = exc.errors if isinstance(exc, ConfigError) else [str(exc)]
            errors.extend(f"{name}: {m}" for m in msgs)
            return None

    if "grid" in active and "grid.n" in vals:
        cfg.grid = build("grid", lambda: GridSpec(vals["grid.n"], vals["grid.L"]))
    if "evolution" in active and "evolution.T" in vals:
        cfg.evolution = build("evolution", lambda: EvolutionConfig(
            vals["evolution.m"], vals["evolution.T"], vals["evolution.n_steps"], vals["evolution.n_quad"],
            vals["evolution.amp"], vals["evolution.hs"], vals["evolution.s"], vals["evolution.nonlinear"],
            vals["evolution.snapshots"]))
        cfg.extra = {"sigma": vals["evolution.sigma"], "n_iter": vals["evolution.n_iter"]}
        if vals["evolution.sigma"] <= 0:
            errors.append("evolution.sigma: must be positive")
        if vals["evolution.n_iter"] < 2:
            errors.append("evolution.n_iter: must be >= 2")
        if vals["evolution.amp"] is not None and vals["evolution.amp"] <= 0:
            errors.append("evolution.amp: must be positive")
        T = vals["evolution.T"]
        for ts in vals["evolution.snapshots"]:
            if not min(0, T) <= ts <= max(0, T):
                errors.append(f"evolution.snapshots: {ts!r} lies outside [0, T]")
    if "illposed" in active and "illposed.lambdas" in vals:
        lams = vals["illposed.lambdas"]
        bad = [lam for lam in lams if not (float(lam).is_integer() and is_power_of_two(int(lam)) and lam >= 16)]
        for lam in bad:
            errors.append(f"illposed.lambdas: {lam:g} is not dyadic (need a power of two >= 16)")
        if len(lams) < 4:
            errors.append(f"illposed.lambdas: a sweep needs at least 4 values, got {len(lams)}")
        if not bad and all(k in vals for k in ("illposed.eps", "illposed.delta", "illposed.s")):
            confs = [build(f"illposed[lambda={lam:g}]", lambda lam=lam: IllposedConfig(
                int(lam), vals["illposed.eps"], vals["illposed.delta"], vals["illposed.s"],
                n_quad=vals["illposed.n_quad"], n_times=vals["illposed.n_times"])) for lam in lams]
            cfg.illposed = tuple(c for c in confs if c is not None)
    if "probe" in active:
        cfg.probe = {k.split(".", 1)[1]: vals[k] for k in vals if k.startswith("probe.")}
        if cfg.probe["n_samples"] < 1:
            errors.append("probe.n_samples: must be >= 1")
        if cfg.probe["n_trials"] is not None and cfg.probe["n_trials"] < 1:
            errors.append("probe.n_trials: must be >= 1")

    if errors:
        raise ConfigError(errors)
    cfg.seed = vals["seed"]
    cfg.values = vals
    return cfg


# commands -------------------------------------------------------------------

class _Writer:
    """Serializes artifact writes into the output directory and remembers them."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.root / name

    def csv_rows(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


def _rng(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.default_rng(seq)


def _cmd_simulate(cfg: RunConfig, out: _Writer, seeds) -> dict:
    ev = cfg.evolution
    amp = 0.5 if ev.amp is None else ev.amp
    psi0 = smooth_random_spinor(cfg.grid, _rng(seeds[0]), cfg.extra["sigma"], amp)
    rec = evolve(psi0, ev)
    rec.write_csv(out.path("trajectory.csv"))
    save_field(out.path("initial.csdf"), psi0)
    save_field(out.path("final.csdf"), as_position(rec.final))
    for i, t in enumerate(sorted(rec.snapshots)):
        save_field(out.path(f"snapshot_{i:03d}.csdf"), as_position(rec.snapshots[t]))
    return {"charge_drift": rec.charge_drift}


def _cmd_picard(cfg: RunConfig, out: _Writer, seeds) -> dict:
    ev = cfg.evolution
    n_iter = cfg.extra["n_iter"]
    shape = smooth_random_spinor(cfg.grid, _rng(seeds[0]), cfg.extra["sigma"], 1.0)
    info = {}
    if ev.amp is None:
        thr = contraction_threshold(shape, ev, n_iter=n_iter)
        info["threshold_hs"] = thr
        delta = 0.5 * thr
    else:
        delta = ev.amp
    psi0 = shape * (delta / sobolev_norm(shape, ev.s))
    res = picard_sequence(psi0, ev, n_iter)
    ratios = [np.nan] + res.ratios
    out.csv_rows("picard.csv", ["n", "p_n", "q_n", "q_ratio"],
                 [[i + 1, repr(p), repr(q), repr(r)] for i, ((p, q), r) in enumerate(zip(res.pairs(), ratios))])
    save_field(out.path("initial.csdf"), as_position(psi0))
    save_field(out.path("picard_final.csdf"), as_position(res.iterates_final[-1]))
    info.update({"delta_hs": delta, "max_ratio": max(res.ratios), "diverged": res.diverged})
    return info


def _cmd_bilinear(cfg: RunConfig, out: _Writer, seeds) -> dict:
    confs = default_bilinear_configs()
    n = cfg.probe["n_trials"] or 20
    reps = [bilinear_constant_probe(b, n_trials=n, seed=cfg.seed, rng=_rng(sq))
            for b, sq in zip(confs, seeds[0].spawn(len(confs)))]
    write_reports(out.path("probe_bilinear.csv"), reps)
    return {"max_slack": max(r.slack for r in reps if not r.skipped)}


def _cmd_nullform(cfg: RunConfig, out: _Writer, seeds) -> dict:
    confs = default_nullform_configs()
    n = cfg.probe["n_trials"] or 10
    reps = [nullform_constant_probe(b, r, w, n_trials=n, seed=cfg.seed, rng=_rng(sq))
            for (b, r, w), sq in zip(confs, seeds[0].spawn(len(confs)))]
    write_reports(out.path("probe_nullform.csv"), reps)
    return {"max_slack": max(r.slack for r in reps if not r.skipped)}


def _cmd_interaction(cfg: RunConfig, out: _Writer, seeds) -> dict:
    floor = interaction_floor()
    reps = interaction_probe(cfg.probe["n_samples"], seed=cfg.seed, rng=_rng(seeds[0]), floor=floor)
    write_reports(out.path("probe_interaction.csv"), reps)
    return {f"{r.probe_name}_min_over_floor": r.measured_min_ratio / r.theoretical_bound for r in reps}


def _cmd_sweep(cfg: RunConfig, out: _Writer, seeds) -> dict:
    c0 = cfg.illposed[0]
    sweep = lambda_sweep([c.lam for c in cfg.illposed], c0.eps, c0.delta, c0.s,
                         n_quad=c0.n_quad, n_times=c0.n_times)
    sweep.write_csv(out.path("illposed_sweep.csv"))
    return {"slope": sweep.slope, "predicted_slope": -2 * c0.s - 3 * c0.eps,
            "min_c1": min(r.pointwise_min_constant for r in sweep.runs)}


def identity_suite(seed: int = 0, n_freq: int = 1000) -> list[tuple[str, float, float]]:
    """Algebraic and gauge invariants as ``(name, residual, tolerance)`` rows."""
    ss = np.random.SeedSequence(seed)
    r1, r2, r3 = (np.random.default_rng(s) for s in ss.spawn(3))
    rows = [(k, v, 1e-12) for k, v in algebra_residuals().items()]
    xi = r1.standard_normal((n_freq, 2)) * 10 ** r1.uniform(-3, 3, (n_freq, 1))
    rows += [(f"projection_{k}", v, 1e-12) for k, v in projection_residuals(xi).items()]
    for s in (1, -1):
        for i in (1, 2):
            rows.append((f"commutator_s{s:+d}_i{i}", float(commutator_residual(s, i, xi).max()), 1e-12))
        for mu in (0, 1, 2):
            rows.append((f"riesz_s{s:+d}_mu{mu}", float(riesz_identity_residual(s, mu, xi).max()), 1e-12))
    xa = r2.standard_normal((n_freq, 2))
    xb = r2.standard_normal((n_freq, 2))
    s1 = r2.choice([1, -1])
    s2 = r2.choice([1, -1])
    d = np.abs(projection_product_norm(s1, xa, s2, xb) - projection_product_norm_svd(s1, xa, s2, xb))
    rows.append(("nullform_norm_vs_svd", float(d.max()), 1e-12))

    g = GridSpec(32, np.pi * 2)
    psi = smooth_random_spinor(g, r3, 3.0, 1.0)
    A = gauge_potential(psi)
    scale = meanfree_charge_density_norm(psi)
    rows.append(("coulomb_divergence", float(np.abs(A.divergence().values).max()), 1e-10))
    rows.append(("gauss_law_relative", cs_gauss_residual(psi, A) / scale, 1e-8))
    a = nonlinear_term(psi, psi, psi).values
    b = nonlinear_term_gamma_form(psi, psi, psi).values
    rows.append(("nonlinearity_alpha_vs_gamma", float(np.abs(a - b).max() / np.abs(a).max()), 1e-10))
    return rows


def _cmd_identities(cfg: RunConfig, out: _Writer, seeds) -> dict:
    rows = identity_suite(cfg.seed)
    out.csv_rows("identities.csv", ["identity", "residual", "tolerance", "pass"],
                 [[n, repr(v), repr(t), "pass" if v <= t else "FAIL"] for n, v, t in rows])
    width = max(len(n) for n, _, _ in rows)
    for n, v, t in rows:
        print(f"{n:<{width}}  {v:.3e}  {'pass' if v <= t else 'FAIL'}")
    n_fail = sum(v > t for _, v, t in rows)
    return {"n_identities": len(rows), "n_failed": n_fail}


_COMMANDS = {
    "simulate": _cmd_simulate,
    "picard": _cmd_picard,
    "probe-bilinear": _cmd_bilinear,
    "probe-nullform": _cmd_nullform,
    "probe-interaction": _cmd_interaction,
    "illposed-sweep": _cmd_sweep,
    "identities": _cmd_identities,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(cfg: RunConfig, out: _Writer, status: str, info: dict, wall: float, threads):
    lines = [
        f"command: {cfg.command}",
        f"status: {status}",
        f"config_sha256: {cfg.config_hash()}",
        f"seed: {cfg.seed}",
        f"python: {platform.python_version()}",
        f"numpy: {np.__version__}",
        f"scipy: {scipy.__version__}",
        f"csdlab: {__version__}",
        f"threads: {threads if threads is not None else 'default'}",
        f"wall_time_s: {wall:.3f}",
    ]
    lines += [f"result.{k}: {v.item() if isinstance(v, np.generic) else v!r}" for k, v in info.items()]
    lines += [f"warning: {w}" for w in cfg.warnings]
    lines += [f"file: {name} sha256={_sha256(out.root / name)}" for name in out.files]
    (out.root / MANIFEST).write_text("\n".join(lines) + "\n")


def run(cfg: RunConfig, threads: int | None = None) -> int:
    """Execute ``cfg``; returns the process exit status."""
    t0 = time.perf_counter()
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: category=io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]
    out = _Writer(cfg.output_dir)
    seeds = np.random.SeedSequence(cfg.seed).spawn(1)
    try:
        with sfft.set_workers(threads or 1):
            info = _COMMANDS[cfg.command](cfg, out, seeds)
        status = "ok"
        if info.get("n_failed"):
            status = "identity"
    except CSDError as exc:
        info, status = {"error": str(exc)}, exc.category
    except OSError as exc:
        info, status = {"error": str(exc)}, "io"
    except (FloatingPointError, ValueError) as exc:
        info, status = {"error": str(exc)}, "numerical"
    # keep only files that were actually written, so the manifest has no dangling entries
    out.files = [f for f in out.files if (out.root / f).exists()]
    try:
        _write_manifest(cfg, out, status, info, time.perf_counter() - t0, threads)
    except OSError as exc:
        print(f"error: category=io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]
    if status != "ok":
        print(f"error: category={status}: {info.get('error', 'identity check failed')}", file=sys.stderr)
    return EXIT_CODES.get(status, 1)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csdlab", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", required=True, help="path to a key = value config file")
    p.add_argument("--output", default=None, help="output directory (default: csdlab-out)")
    p.add_argument("--seed", type=_seed, default=None, help="override the config seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: category=io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConfigWarning)
            cfg = parse_config(text)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: category=config: {e}", file=sys.stderr)
        return EXIT_CODES["config"]
    if args.seed is not None:
        cfg.seed = cfg.values["seed"] = args.seed
    if args.threads is not None and args.threads < 1:
        print("error: category=config: --threads must be >= 1", file=sys.stderr)
        return EXIT_CODES["config"]
    cfg.output_dir = Path(args.output) if args.output else Path(os.getcwd()) / "csdlab-out"
    return run(cfg, args.threads)


if __name__ == "__main__":
    sys.exit(main())
