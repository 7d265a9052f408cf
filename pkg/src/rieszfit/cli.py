"""Command-line driver.

Verbs: ``fit``, ``verify``, ``identities``, ``harnack``, ``growth``. A TOML
config file (``--config``) supplies defaults; flags override it. Exit codes:
0 all checks pass, 2 configuration error, 3 fit tolerance not met, 4 a
verification check failed. Log verbosity comes from ``RIESZFIT_LOG_LEVEL``.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import tomli
import tomli_w

from . import fitter, verifier
from .expressions import ExpressionError, TargetSpec
from .kernel import KernelSpec, is_admissible_exponent
from .report import emit_report
from .sources import build_grid

MODES = ("fit", "verify", "identities", "harnack", "growth")
EXIT_OK, EXIT_CONFIG, EXIT_UNMET, EXIT_VERIFY = 0, 2, 3, 4
LOG_ENV = "RIESZFIT_LOG_LEVEL"
DEFAULT_TARGETS = {"harnack": verifier.HARNACK_TARGET}

logger = logging.getLogger("rieszfit")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "fit"
    d: int = 1
    n: float | None = None
    s: float | None = None
    k: int = 0
    epsilon: float | None = 1e-2
    target: str | None = None
    schedule: list[int] | None = None
    spacing: float | None = None
    cutoff_ratio: float = fitter.DEFAULT_CUTOFF_RATIO
    seed: int = 0
    out: str = "rieszfit-out"
    epsilons: list[float] = field(default_factory=lambda: [1e-1, 3e-2, 1e-2])
    r: int = 2
    x: float = 3.5

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.d not in (1, 2, 3):
            raise ConfigError(f"d must be 1, 2 or 3, got {self.d}")
        if self.n is not None and self.s is not None:
            raise ConfigError("give exactly one of n and s")
        if self.s is not None and not 0 < self.s < 1:
            raise ConfigError(f"s must lie in (0, 1), got {self.s}")
        if not is_admissible_exponent(self.exponent, self.d):
            raise ConfigError(f"n + d = {self.exponent + self.d:g} is an excluded exponent (2, 4, 6, ...)")
        if self.k < 0 or self.k > 4:
            raise ConfigError(f"k must lie in 0..4, got {self.k}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.schedule is not None:
            if not self.schedule or any(b <= a for a, b in zip(self.schedule, self.schedule[1:])):
                raise ConfigError("schedule must be a nonempty strictly increasing list")
        if not 0 < self.cutoff_ratio < 1:
            raise ConfigError("cutoff_ratio must lie in (0, 1)")
        return self

    @property
    def exponent(self) -> float:
        if self.s is not None:
            return 2 * self.s - self.d
        return -0.5 if self.n is None else self.n

    @property
    def fractional_order(self) -> float:
        s = self.s if self.s is not None else (self.exponent + self.d) / 2
        if not 0 < s < 1:
            raise ConfigError(f"n = {self.exponent:g} is not 2s - d for any s in (0, 1)")
        return s

    def target_spec(self) -> TargetSpec:
        text = self.target if self.target is not None else DEFAULT_TARGETS.get(self.mode, "|y|^2")
        return TargetSpec(text, self.d)

    def to_toml(self) -> str:
        data = {k: v for k, v in dataclasses.asdict(self).items() if v is not None}
        return tomli_w.dumps(data)

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config: {exc}") from None
        flat = {}
        for key, value in data.items():
            if isinstance(value, dict):
                flat.update(value)
            else:
                flat[key] = value
        return cls.from_mapping(flat)

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key {unknown[0]!r}")
        return cls(**data)


def _spec(cfg: RunConfig) -> KernelSpec:
    return KernelSpec(cfg.d, cfg.exponent, max(cfg.k, 2))


def _grid(cfg: RunConfig):
    try:
        return build_grid(cfg.d, cfg.k, cfg.spacing)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _config_block(cfg: RunConfig) -> dict:
    return {k: v for k, v in dataclasses.asdict(cfg).items() if k != "out"}


def _check(name, measured, tolerance, passed):
    return {"name": name, "measured": measured, "tolerance": tolerance, "pass": bool(passed)}


def _curve_rows(results):
    return [(r.atoms_used, r.residual_ck, r.coefficient_norm, r.rank_used) for r in results]


def _residual_curve(results):
    return {"header": ["atoms_used", "residual_ck", "coefficient_norm", "rank_used"],
            "rows": _curve_rows(results), "x": 0, "y": 1, "title": "Residual curve",
            "xlabel": "atoms used", "ylabel": "grid C^k residual", "logy": True}


def _run_fit_steps(cfg: RunConfig):
    target = cfg.target_spec()
    grid = _grid(cfg)
    schedule = cfg.schedule or list(fitter.DEFAULT_SCHEDULE)
    results = fitter.fit_schedule(_spec(cfg), target, cfg.k, cfg.epsilon, schedule, grid, cfg.cutoff_ratio)
    final = results[-1]
    fine = fitter.residual_ck(final.density, target, grid.refined())
    change = abs(fine - final.residual_ck) / final.residual_ck if final.residual_ck > 0 else 0.0
    if change > 0.5:
        logger.warning("residual changes by %.0f%% on the refined grid", 100 * change)
    refinement = {"coarse": final.residual_ck, "fine": fine, "relative_change": change,
                  "within_bound": change <= 0.5}
    return results, refinement


def run_fit(cfg: RunConfig):
    results, refinement = _run_fit_steps(cfg)
    final = results[-1]
    eps = cfg.epsilon if cfg.epsilon is not None else math.inf
    checks = [_check("residual_ck", final.residual_ck, eps, final.residual_ck <= eps)]
    payload = {"mode": "fit", "config": _config_block(cfg), "steps": [r.to_dict() for r in results],
               "refinement": refinement}
    emit_report(cfg.out, "report", payload, checks, {"residual_curve": _residual_curve(results)})
    return EXIT_OK if checks[0]["pass"] else EXIT_UNMET


def run_verify(cfg: RunConfig):
    s = cfg.fractional_order
    results, refinement = _run_fit_steps(cfg)
    final = results[-1]
    record = verifier.harmonicity_check(final.density, s, seed=cfg.seed)
    checks = [_check("harmonicity_relative", record.relative, 1e-2, record.relative <= 1e-2),
              _check("accuracy_warnings", record.warnings, 0, record.warnings == 0)]
    calibration = None
    try:
        cal = verifier.riesz_normalization(cfg.d, s)
        calibration = {"constant": cal.constant, "cross_check": cal.cross_check}
        checks.append(_check("calibration_cross_check", cal.relative_gap, 1e-2, cal.relative_gap <= 1e-2))
    except verifier.CalibrationError as exc:
        logger.warning("calibration: %s", exc)
        checks.append(_check("calibration_cross_check", math.nan, 1e-2, False))
    payload = {"mode": "verify", "config": _config_block(cfg), "s": s,
               "fit": final.to_dict(), "refinement": refinement,
               "harmonicity": {"points": record.probe_points, "values": record.probe_values,
                               "annulus_point": record.annulus_point, "annulus_value": record.annulus_value},
               "calibration": calibration}
    emit_report(cfg.out, "report", payload, checks, {"residual_curve": _residual_curve(results)})
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_VERIFY


def run_identities(cfg: RunConfig):
    report = verifier.run_identity_checks(cfg.d, cfg.seed)
    checks = [c.to_dict() for c in report.checks]
    emit_report(cfg.out, "report", {"mode": "identities", "config": _config_block(cfg)}, checks)
    return EXIT_OK if report.passed else EXIT_VERIFY


def run_harnack(cfg: RunConfig):
    schedule = cfg.schedule or list(verifier.HARNACK_SCHEDULE)
    eps = sorted(cfg.epsilons, reverse=True)
    records = verifier.harnack_probe(_spec(cfg), eps, 0, cfg.target_spec().expression, schedule,
                                     cutoff_ratio=cfg.cutoff_ratio)
    met = [r for r in records if r.met]
    final = met[-1].ratio if met else math.nan
    checks = [_check("ratios_strictly_increasing", float(verifier.harnack_ratios_increasing(records)), 1.0,
                     verifier.harnack_ratios_increasing(records) and len(met) >= 2),
              _check("final_ratio_at_least", final, 10.0, final >= 10.0)]
    rows = [(r.epsilon_target, r.sup_value, r.inf_value, r.ratio, r.residual, r.atoms_used) for r in records]
    curve = {"header": ["epsilon", "sup", "inf", "ratio", "residual_ck", "atoms_used"], "rows": rows,
             "x": 0, "y": 3, "title": "Harnack ratio on the half ball", "xlabel": "epsilon",
             "ylabel": "sup / inf", "logx": True, "logy": True}
    payload = {"mode": "harnack", "config": _config_block(cfg),
               "records": [dataclasses.asdict(r) for r in records]}
    emit_report(cfg.out, "report", payload, checks, {"harnack": curve})
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_VERIFY


def run_growth(cfg: RunConfig):
    x = [cfg.x] + [0.0] * (cfg.d - 1)
    try:
        probe = verifier.lemma_growth_probe(cfg.d, x, cfg.k, range(-40, 1), cfg.r)
    except verifier.GrowthProbeError as exc:
        checks = [_check("constant_found", exc.worst_ratio, 1.0, False)]
        emit_report(cfg.out, "report", {"mode": "growth", "config": _config_block(cfg)}, checks)
        return EXIT_VERIFY
    lo, hi = verifier.growth_tail_band(probe)
    checks = [_check("constant_found", probe.worst_ratio, 1.0, True),
              _check("tail_band_ratio", hi / lo, 1e4, hi / lo <= 1e4)]
    rows = [(int(m), v) for m, v in zip(probe.exponents, probe.norms)]
    curve = {"header": ["m", "ck_norm"], "rows": rows, "x": 0, "y": 1, "title": "C^k norm of K_m",
             "xlabel": "m", "ylabel": "grid C^k norm", "logy": True}
    payload = {"mode": "growth", "config": _config_block(cfg), "N": probe.N, "r": probe.r}
    emit_report(cfg.out, "report", payload, checks, {"growth": curve})
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_VERIFY


RUNNERS = {"fit": run_fit, "verify": run_verify, "identities": run_identities,
           "harnack": run_harnack, "growth": run_growth}


def run(cfg: RunConfig) -> int:
    cfg.validate()
    cfg.target_spec()  # surface grammar errors before any work
    return RUNNERS[cfg.mode](cfg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rieszfit", description="Fit and verify Riesz-kernel potentials.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", type=Path)
    p.add_argument("--out")
    p.add_argument("--d", type=int)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--n", type=float)
    group.add_argument("--s", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--target")
    p.add_argument("--schedule", type=lambda t: [int(v) for v in t.split(",")],
                   help="comma-separated atom layout sizes")
    p.add_argument("--spacing", type=float)
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        data = dataclasses.asdict(RunConfig.from_toml(text))
    data["mode"] = args.mode
    overrides = {k: getattr(args, k) for k in ("out", "d", "k", "epsilon", "seed", "target", "schedule", "spacing")}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.n is not None:
        data["n"], data["s"] = args.n, None
    if args.s is not None:
        data["s"], data["n"] = args.s, None
    return RunConfig.from_mapping(data)


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except ExpressionError as exc:
        print(f"error: target: {exc} (token {exc.token!r})", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, TypeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except fitter.FitFailureError as exc:
        print(f"error: fit: {exc} (best residual {exc.best_residual:.3e})", file=sys.stderr)
        return EXIT_UNMET
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
