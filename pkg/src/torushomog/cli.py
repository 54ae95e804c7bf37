"""Command-line orchestration: config parsing, stage pipelines, caching, and
reproducibility manifests.

Every stage derives its seed from the global seed and the stage name, writes
its artifacts under --out, and records a manifest with content fingerprints.
Expensive stages (corrector, invariant) are cached by a hash of their inputs,
so downstream commands reuse them and stale artifacts are recomputed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
try:
    import tomllib
except ModuleNotFoundError:                      # python < 3.11
    import tomli as tomllib
from pathlib import Path

import numpy as np

from . import __version__, clt, corrector, effective, ergodic, fields, fk, rng
from .engine import (EngineError, SimConfig, hitting_diagnostic,
                     simulate_scaled, dump_paths_csv, summary_json)
from .fields import Ball, EmptyRegion, WholeCell
from .interp import grid_points
from .torus import Torus


class ConfigError(ValueError):
    pass


BUDGET_PATH_FACTOR = {"smoke": 0.125, "desk": 1.0, "full": 4.0}


# ---------------------------------------------------------------------------
# config helpers

def _section(cfg: dict, name: str) -> dict:
    if name not in cfg:
        raise ConfigError(f"config is missing the [{name}] section")
    return cfg[name]


def _coefficients(cfg: dict) -> fields.CoefficientSet:
    sec = _section(cfg, "coefficients")
    label = sec.get("label")
    if not label:
        raise ConfigError("[coefficients] needs a catalog label")
    params = {k: v for k, v in sec.items() if k != "label"}
    try:
        return fields.builtin(label, **params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _sim_config(sec: dict, seed: int, budget: str,
                defaults: dict = None) -> SimConfig:
    d = dict(defaults or {})
    d.update(sec)
    try:
        n_paths = max(2, int(round(d["n_paths"] * BUDGET_PATH_FACTOR[budget])))
        return SimConfig(step=float(d["step"]), horizon=float(d["horizon"]),
                         n_paths=n_paths, seed=seed,
                         epsilon=float(d.get("epsilon", 0.0)),
                         store_stride=int(d.get("store_stride", 1)))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad simulation block: {exc}") from exc


def _catalog_fn(spec, dim: int):
    """Small closed catalog of analytic problem-data functions."""
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "zero":
        return lambda p: np.zeros(np.atleast_2d(p).shape[0])
    if kind == "one":
        return lambda p: np.ones(np.atleast_2d(p).shape[0])
    if kind == "const":
        v = float(spec["value"])
        return lambda p: np.full(np.atleast_2d(p).shape[0], v)
    if kind == "abs2":
        return lambda p: np.sum(np.atleast_2d(p) ** 2, axis=1)
    if kind in ("cos_mode", "sin_mode"):
        axis = int(spec.get("axis", 1)) - 1
        period = float(spec.get("period", 1.0))
        trig = np.cos if kind == "cos_mode" else np.sin
        return lambda p: trig(2.0 * math.pi * np.atleast_2d(p)[:, axis] / period)
    raise ConfigError(f"unknown function kind: {kind!r}")


def _region(spec, torus: Torus):
    if spec is None:
        return EmptyRegion()
    kind = spec.get("kind")
    if kind == "ball":
        return Ball(center=tuple(spec["center"]), radius=float(spec["radius"]))
    if kind == "whole":
        return WholeCell()
    raise ConfigError(f"unknown region kind: {kind!r}")


def _domain(spec) -> fk.DomainSpec:
    if spec is None or spec.get("kind") != "ball":
        raise ConfigError("domain must be {kind='ball', center, radius}")
    return fk.ball_domain(spec["center"], float(spec["radius"]))


# ---------------------------------------------------------------------------
# artifacts, caching, manifest

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _stage_key(name: str, payload: dict) -> str:
    blob = json.dumps({"stage": name, "version": __version__, **payload},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Runner:
    def __init__(self, args, cfg: dict):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cache_dir = self.out / "cache"
        self.cache_dir.mkdir(exist_ok=True)
        self.seed = args.seed if args.seed is not None \
            else int(cfg.get("seed", 0))
        self.budget = args.budget
        self.threads = args.threads
        self.artifacts = []
        self.upstream = {}
        self.t0 = time.time()

    def stage_seed(self, stage: str) -> int:
        return rng.stage_seed(self.seed, stage)

    def emit(self, path: Path):
        self.artifacts.append(path)
        return path

    def manifest(self, command: str, extra: dict = None):
        path = self.out / f"{command}_manifest.json"
        with open(path, "w") as fh:
            json.dump({
                "command": command,
                "config": self.cfg,
                "global_seed": self.seed,
                "budget": self.budget,
                "threads": self.threads,
                "versions": {
                    "python": sys.version.split()[0],
                    "numpy": np.__version__,
                    "package": __version__,
                },
                "upstream_fingerprints": self.upstream,
                "wall_time_s": round(time.time() - self.t0, 3),
                "artifacts": {p.name: _sha256(p) for p in self.artifacts},
                **(extra or {}),
            }, fh, indent=2, default=str)

    # -- cached stages ----------------------------------------------------

    def invariant_measure(self, cset) -> ergodic.InvariantMeasureEstimate:
        sec = _section(self.cfg, "invariant")
        if sec.get("uniform"):
            return ergodic.uniform_measure(cset.torus, sec["bins"])
        seed = self.stage_seed("invariant")
        key = _stage_key("invariant", {"sec": sec, "seed": seed,
                                       "budget": self.budget,
                                       "label": cset.label})
        self.upstream["invariant"] = key
        cache = self.cache_dir / f"invariant-{key}.npz"
        cfg = _sim_config(sec, seed, self.budget)
        if cache.exists():
            z = np.load(cache)
            return ergodic.InvariantMeasureEstimate(
                torus=cset.torus, bins=tuple(int(b) for b in z["bins"]),
                mass=z["mass"], burn_in=float(z["burn_in"]),
                total_time=float(z["total_time"]), epsilon=cfg.epsilon)
        m = ergodic.estimate_invariant(cset, cfg, sec["bins"],
                                       burn_in=sec.get("burn_in"),
                                       threads=self.threads)
        np.savez(cache, bins=np.array(m.bins), mass=m.mass,
                 burn_in=m.burn_in, total_time=m.total_time)
        return m

    def corrector_field(self, cset, which: str = "corrector"
                        ) -> corrector.CorrectorField:
        sec = _section(self.cfg, which)
        seed = self.stage_seed(which)
        key = _stage_key(which, {"sec": sec, "seed": seed,
                                 "budget": self.budget, "label": cset.label})
        self.upstream[which] = key
        cache = self.cache_dir / f"{which}-{key}.npz"
        target_name = sec.get("target", "drift")
        if target_name == "drift":
            target, pi_t = cset.drift_b, [0.0] * cset.dim
        elif target_name == "potential_d":
            target, pi_t = cset.potential_d, [0.0]
        else:
            raise ConfigError(f"unknown corrector target: {target_name!r}")
        if cache.exists():
            z = np.load(cache)
            fld = corrector.CorrectorField(
                torus=cset.torus, shape=tuple(int(g) for g in z["shape"]),
                values=z["values"], stderr=z["stderr"],
                truncation_T=float(z["T"]), n_paths=int(z["n_paths"]),
                path_integrals=z["path_integrals"])
            return corrector.differentiate(fld)
        cfg = _sim_config(sec, seed, self.budget, {"horizon": 1.0})
        fld = corrector.solve_corrector(
            cset, target, pi_t, sec["grid"], cfg,
            gamma=float(sec["gamma"]), Gamma=float(sec.get("Gamma", 1.0)),
            tail_tol=float(sec.get("tail_tol", 1e-3)), threads=self.threads)
        np.savez(cache, shape=np.array(fld.shape), values=fld.values,
                 stderr=fld.stderr, T=fld.truncation_T, n_paths=fld.n_paths,
                 path_integrals=fld.path_integrals)
        return corrector.differentiate(fld)


# ---------------------------------------------------------------------------
# subcommands

def cmd_validate(r: Runner):
    cset = _coefficients(r.cfg)
    sec = r.cfg.get("validate", {})
    report = fields.validate(
        cset, grid_step=float(sec.get("grid_step",
                                      float(cset.torus.periods.min()) / 64)),
        declared_O=_region(sec.get("region"), cset.torus))
    path = r.emit(r.out / "validate.json")
    with open(path, "w") as fh:
        json.dump({k: (v if not isinstance(v, dict) else v)
                   for k, v in report.__dict__.items()}, fh, indent=2,
                  default=float)
    r.manifest("validate", {"all_passed": report.all_passed})
    print(f"validate: {'all-pass' if report.all_passed else 'FAILED'} "
          f"({path})")
    if not report.all_passed:
        raise EngineError("coefficient validation failed")


def cmd_simulate(r: Runner):
    cset = _coefficients(r.cfg)
    sec = _section(r.cfg, "simulate")
    cfg = _sim_config(sec, r.stage_seed("simulate"), r.budget)
    starts = np.asarray(sec.get("starts", [[0.0] * cset.dim]), float)
    batch = simulate_scaled(cset, cfg, starts, threads=r.threads)
    dump_paths_csv(batch, r.emit(r.out / "paths.csv"))
    summary_json(batch, r.emit(r.out / "paths_summary.json"),
                 runtime_s=time.time() - r.t0)
    r.manifest("simulate")
    print(f"simulate: {batch.states.shape[0]} paths, "
          f"{batch.times.shape[0]} stored times")


def cmd_invariant(r: Runner):
    cset = _coefficients(r.cfg)
    m = r.invariant_measure(cset)
    ergodic.histogram_csv(m, r.emit(r.out / "invariant.csv"))
    dev = float(np.max(np.abs(m.mass - 1.0 / m.mass.size) * m.mass.size))
    r.manifest("invariant", {"max_rel_deviation_from_uniform": dev})
    print(f"invariant: {m.mass.size} bins, max rel deviation from uniform "
          f"{dev:.4f}")


def cmd_mixing(r: Runner):
    cset = _coefficients(r.cfg)
    sec = _section(r.cfg, "mixing")
    cfg = _sim_config(sec, r.stage_seed("mixing"), r.budget)
    f = _catalog_fn(sec.get("f", {"kind": "cos_mode",
                                  "period": float(cset.torus.periods[0])}),
                    cset.dim)
    if "x1" not in sec or "x2" not in sec:
        raise ConfigError("[mixing] needs the start points x1 and x2")
    diag = ergodic.mixing_rate(
        cset, f, (sec["x1"], sec["x2"]), cfg,
        time_grid=np.linspace(cfg.step * 10, cfg.horizon,
                              int(sec.get("time_points", 24))),
        threads=r.threads)
    ergodic.mixing_csv(diag, r.emit(r.out / "mixing.csv"))
    r.manifest("mixing", {"gamma": diag.fitted_rate_gamma,
                          "Gamma": diag.fitted_prefactor_Gamma,
                          "r2": diag.fit_r2, "resolvable": diag.resolvable})
    print(f"mixing: gamma={diag.fitted_rate_gamma:.5f} "
          f"r2={diag.fit_r2:.4f} resolvable={diag.resolvable}")


def cmd_corrector(r: Runner):
    cset = _coefficients(r.cfg)
    fld = r.corrector_field(cset)
    corrector.corrector_csv(fld, r.emit(r.out / "corrector.csv"))
    r.manifest("corrector", {
        "truncation_T": fld.truncation_T,
        "max_stderr": float(fld.stderr.max()),
        "richardson_ratio": fld.richardson_ratio})
    print(f"corrector: grid {fld.shape}, T={fld.truncation_T:.3f}, "
          f"max stderr {float(fld.stderr.max()):.4f}")


def cmd_effective(r: Runner):
    cset = _coefficients(r.cfg)
    beta = r.corrector_field(cset)
    pi = r.invariant_measure(cset)
    delta = r.corrector_field(cset, "delta") if "delta" in r.cfg else None
    model = effective.effective_from_corrector(
        cset, beta, pi, delta=delta,
        e_field=cset.potential_e if delta is not None else None)
    sec = r.cfg.get("longtime")
    result = {"cov_a": model.cov_a.tolist(),
              "cov_a_stderr": model.cov_a_stderr.tolist(),
              "drift_b": model.drift_b.tolist(),
              "drift_b_stderr": model.drift_b_stderr.tolist(),
              "min_eigenvalue": model.min_eigenvalue,
              "psd_repaired": model.psd_repaired}
    if model.effective_potential is not None:
        result["parabolic_drift"] = model.parabolic_drift.tolist()
        result["effective_potential"] = model.effective_potential
    if sec:
        cfg = _sim_config(sec, r.stage_seed("longtime"), r.budget)
        lt = effective.effective_from_longtime(
            cset, cfg, np.linspace(0.0, cfg.horizon,
                                   int(sec.get("checkpoints", 21))),
            threads=r.threads)
        check = effective.cross_check(model, lt)
        result["longtime_cov_a"] = lt.cov_a.tolist()
        result["cross_check_max_z"] = check["max_abs_z"]
        result["cross_check_passed"] = check["passed"]
    path = r.emit(r.out / "effective.json")
    with open(path, "w") as fh:
        json.dump(result, fh, indent=2)
    r.manifest("effective")
    print(f"effective: cov_a={model.cov_a.tolist()}")


def cmd_clt(r: Runner):
    cset = _coefficients(r.cfg)
    sec = _section(r.cfg, "clt")
    cfg = _sim_config(sec, r.stage_seed("clt"), r.budget)
    beta = r.corrector_field(cset)
    pi = r.invariant_measure(cset)
    model = effective.effective_from_corrector(cset, beta, pi)
    rep = clt.verify_clt(cset, model, float(sec["epsilon"]),
                         sec["times"], cfg, threads=r.threads)
    clt.clt_csv(rep, r.emit(r.out / "clt.csv"))
    clt.clt_json(rep, r.emit(r.out / "clt_summary.json"))
    r.manifest("clt", {"linearity_r2": rep.linearity_r2,
                       "normality_ok": rep.normality_ok})
    print(f"clt: r2={rep.linearity_r2:.4f} ks={rep.ks_pvalues} "
          f"normality_ok={rep.normality_ok}")


def cmd_elliptic(r: Runner):
    cset = _coefficients(r.cfg)
    sec = _section(r.cfg, "elliptic")
    cfg = _sim_config(sec, r.stage_seed("elliptic"), r.budget,
                      {"horizon": 1.0})
    dom = _domain(sec.get("domain"))
    f = _catalog_fn(sec.get("f", {"kind": "zero"}), cset.dim)
    g = _catalog_fn(sec.get("g", {"kind": "one"}), cset.dim)
    e = _catalog_fn(sec.get("e"), cset.dim)
    solver = fk.solve_elliptic_extrapolated if sec.get("extrapolate", True) \
        else fk.solve_elliptic
    est = solver(cset, float(sec["epsilon"]), dom, f, g, sec["x"], cfg,
                 e_field=e, threads=r.threads)
    path = r.emit(r.out / "elliptic.json")
    with open(path, "w") as fh:
        json.dump(est.__dict__, fh, indent=2)
    r.manifest("elliptic")
    print(f"elliptic: u={est.value:.6f} +/- {est.stderr:.6f} "
          f"(exited {est.exited_fraction:.3f})")


def cmd_parabolic(r: Runner):
    cset = _coefficients(r.cfg)
    sec = _section(r.cfg, "parabolic")
    cfg = _sim_config(sec, r.stage_seed("parabolic"), r.budget,
                      {"horizon": 1.0})
    f = _catalog_fn(sec.get("f", {"kind": "zero"}), cset.dim)
    g = _catalog_fn(sec.get("g", {"kind": "one"}), cset.dim)
    est = fk.solve_parabolic(
        cset, float(sec["epsilon"]), f, g, sec["x"], float(sec["t"]), cfg,
        d_field=_catalog_fn(sec.get("d"), cset.dim),
        e_field=_catalog_fn(sec.get("e"), cset.dim), threads=r.threads)
    path = r.emit(r.out / "parabolic.json")
    with open(path, "w") as fh:
        json.dump(est.__dict__, fh, indent=2)
    r.manifest("parabolic")
    print(f"parabolic: u={est.value:.6f} +/- {est.stderr:.6f}")


def cmd_study(r: Runner):
    cset = _coefficients(r.cfg)
    sec = _section(r.cfg, "study")
    cfg = _sim_config(sec, r.stage_seed("study"), r.budget, {"horizon": 1.0})
    dom = _domain(sec.get("domain"))
    f = _catalog_fn(sec.get("f", {"kind": "zero"}), cset.dim)
    g = _catalog_fn(sec.get("g", {"kind": "one"}), cset.dim)
    e = _catalog_fn(sec.get("e", {"kind": "const", "value": -1.0}), cset.dim)
    pi_e = float(sec.get("pi_e", -1.0))
    beta = r.corrector_field(cset)
    pi = r.invariant_measure(cset)
    model = effective.effective_from_corrector(cset, beta, pi)
    rows = []
    for x in sec["points"]:
        u0 = fk.solve_elliptic_homogenized(
            model, dom, f, g, x,
            SimConfig(step=cfg.step, horizon=cfg.horizon,
                      n_paths=cfg.n_paths, seed=r.stage_seed("study-u0")),
            pi_e=pi_e, threads=r.threads)
        for eps in sec["epsilons"]:
            ue = fk.solve_elliptic_extrapolated(
                cset, float(eps), dom, f, g, x,
                SimConfig(step=cfg.step, horizon=cfg.horizon,
                          n_paths=cfg.n_paths,
                          seed=r.stage_seed(f"study-{eps}")),
                e_field=e, threads=r.threads)
            rows.append({"epsilon": float(eps), "x": list(np.atleast_1d(x)),
                         "u_eps": ue.value, "stderr_eps": ue.stderr,
                         "u0": u0.value, "stderr_0": u0.stderr})
    fk.study_csv(rows, r.emit(r.out / "study.csv"))
    r.manifest("study")
    print(f"study: {len(rows)} rows -> study.csv")


def cmd_example2d(r: Runner):
    """Full pipeline on the degenerate 2D catalog example."""
    cset = fields.builtin("paper_2d_degenerate")
    sec = r.cfg.get("example2d", {})
    pf = BUDGET_PATH_FACTOR[r.budget]

    report = fields.validate(cset, grid_step=0.15625,
                             declared_O=Ball((5.0, 5.0), 3.0))
    print(f"example2d/validate: all_passed={report.all_passed} "
          f"degenerate_fraction={report.degenerate_fraction:.3f}")

    grid = grid_points(cset.torus, (8, 8))
    hcfg = SimConfig(step=float(sec.get("step", 5e-3)),
                     horizon=float(sec.get("hit_horizon", 60.0)),
                     n_paths=max(2, int(32 * pf)),
                     seed=r.stage_seed("ex2d-hit"))
    hit = hitting_diagnostic(cset, Ball((5.0, 5.0), 3.0), hcfg, grid,
                             threads=r.threads)
    path = r.emit(r.out / "example2d_hitting.csv")
    with open(path, "w") as fh:
        fh.write("x_1,x_2,fraction,q25,q50,q90\n")
        for s, frac, q in zip(hit.starts, hit.fractions, hit.time_quantiles):
            vals = [s[0], s[1], frac, q[0], q[1], q[2]]
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")
    print(f"example2d/hitting: min fraction {hit.fractions.min():.3f}")

    icfg = SimConfig(step=float(sec.get("step", 5e-3)),
                     horizon=float(sec.get("inv_horizon", 400.0)),
                     n_paths=max(2, int(round(256 * pf))),
                     seed=r.stage_seed("ex2d-inv"))
    m = ergodic.estimate_invariant(cset, icfg, sec.get("bins", [32, 32]),
                                   threads=r.threads)
    ergodic.histogram_csv(m, r.emit(r.out / "example2d_invariant.csv"))
    dev = float(np.max(np.abs(m.mass - 1.0 / m.mass.size) * m.mass.size))
    print(f"example2d/invariant: max rel deviation {dev:.3f}")

    bcfg = SimConfig(step=float(sec.get("step", 5e-3)),
                     horizon=float(sec.get("inv_horizon", 400.0)) / 2,
                     n_paths=max(2, int(round(128 * pf))),
                     seed=r.stage_seed("ex2d-pib"))
    pib, pib_err = ergodic.birkhoff_average(cset, cset.drift_b, bcfg,
                                            threads=r.threads)

    lcfg = SimConfig(step=float(sec.get("step", 5e-3)), horizon=1.0,
                     n_paths=max(4, int(round(512 * pf))),
                     seed=r.stage_seed("ex2d-long"))
    model = effective.effective_from_longtime(
        cset, lcfg, np.linspace(0.0, float(sec.get("long_horizon", 200.0)), 11),
        threads=r.threads)

    ccfg = SimConfig(step=float(sec.get("clt_step", 5e-3)), horizon=1.0,
                     n_paths=max(4, int(round(1024 * pf))),
                     seed=r.stage_seed("ex2d-clt"))
    rep = clt.verify_clt(cset, model, float(sec.get("epsilon", 0.1)),
                         sec.get("times", [0.25, 0.5, 0.75, 1.0]),
                         ccfg, start=(2.5, 2.5), threads=r.threads)
    clt.clt_csv(rep, r.emit(r.out / "example2d_clt.csv"))
    clt.clt_json(rep, r.emit(r.out / "example2d_clt_summary.json"))

    w, _ = np.linalg.eigh(model.cov_a)
    path = r.emit(r.out / "example2d_effective.json")
    with open(path, "w") as fh:
        json.dump({
            "cov_a": model.cov_a.tolist(),
            "cov_a_stderr": model.cov_a_stderr.tolist(),
            "cov_a_eigenvalues": w.tolist(),
            "symmetric": True, "psd": bool(w.min() >= 0),
            "pi_b": pib.tolist(), "pi_b_stderr": pib_err.tolist(),
            "hitting_min_fraction": float(hit.fractions.min()),
            "invariant_max_rel_deviation": dev,
            "clt_linearity_r2": rep.linearity_r2,
            "clt_ks_pvalues": rep.ks_pvalues.tolist(),
        }, fh, indent=2)
    r.manifest("example2d")
    print(f"example2d: cov_a={model.cov_a.tolist()} "
          f"r2={rep.linearity_r2:.4f}")


COMMANDS = {
    "validate": cmd_validate, "simulate": cmd_simulate,
    "invariant": cmd_invariant, "mixing": cmd_mixing,
    "corrector": cmd_corrector, "effective": cmd_effective,
    "clt": cmd_clt, "elliptic": cmd_elliptic, "parabolic": cmd_parabolic,
    "study": cmd_study, "example2d": cmd_example2d,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="torushomog",
        description="Monte Carlo homogenization pipelines on flat tori")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=False, default=None,
                   help="TOML experiment config")
    p.add_argument("--seed", type=int, default=None,
                   help="global seed (overrides config)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--budget", choices=sorted(BUDGET_PATH_FACTOR),
                   default="desk")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = {}
        if args.config is not None:
            try:
                with open(args.config, "rb") as fh:
                    cfg = tomllib.load(fh)
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                return 4
            except tomllib.TOMLDecodeError as exc:
                print(f"error: config parse failure: {exc}", file=sys.stderr)
                return 2
        elif args.command != "example2d":
            print("error: --config is required for this command",
                  file=sys.stderr)
            return 2
        runner = Runner(args, cfg)
        COMMANDS[args.command](runner)
        return 0
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (EngineError, RuntimeError, np.linalg.LinAlgError,
            FloatingPointError, ValueError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
