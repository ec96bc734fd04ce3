"""Command-line validation harness.

Usage::

    steinmi <command> [--config PATH] [--seed INT] [--n INT] [--dims CSVLIST]
            [--rho-grid CSVLIST] [--threshold FLOAT] [--bandwidth FLOAT]
            [--rp-dims CSVLIST] [--out PATH]

Commands: ``scorecheck``, ``toy``, ``gradcheck``, ``rp-ablation``. Output is
CSV (stdout unless ``--out``). Exit codes: 0 all tolerances met,
1 configuration error, 2 I/O error, 3 tolerance failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .encoders import GaussianChannelEncoder, IdentityEncoder, LinearEncoder
from .errors import SteinMIError
from .mige import cond_entropy_grad, entropy_grad, mi_grad_circ2, mi_grad_circ3
from .oracles import (
    ToyProblem,
    analytic_mi_grad,
    finite_diff,
    gaussian_entropy,
    linear_gaussian_chain_mi,
    linear_gaussian_mi,
)
from .projection import make_projector
from .ssge import SsgeConfig, fit, stein_residual

log = logging.getLogger(__name__)

COMMANDS = ("scorecheck", "toy", "gradcheck", "rp-ablation")
EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_TOLERANCE = 0, 1, 2, 3

DEFAULT_RHO_GRID = tuple(round(-0.9 + 0.1 * i, 1) for i in range(19))
TOY_REPEATS = 3
ABLATION_REPEATS = 5
SCORECHECK_SIZES = (100, 400, 1600)
SCORECHECK_REPEATS = 10
SCORECHECK_QUERIES = 200
# bound on the Stein residual of fitted scores at their own base samples
SCORECHECK_RESIDUAL_MAX = 0.1

HEADERS = {
    "scorecheck": ["dist", "d", "M", "rmse_vs_analytic", "stein_residual"],
    "toy": ["d", "rho", "n", "seed", "grad_estimate", "grad_analytic", "rel_err",
            "j_used", "eigen_mass"],
    "gradcheck": ["case", "param_index", "mige", "finite_diff_of_analytic_mi",
                  "abs_err", "rel_err"],
    "rp-ablation": ["d", "k", "rho", "grad_estimate", "grad_analytic", "rel_err",
                    "wall_ms"],
}


class ConfigError(SteinMIError, ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int = 0
    n: int = 4000
    dims: tuple = (5, 10, 20)
    rho_grid: tuple = DEFAULT_RHO_GRID
    mass_threshold: float = 0.94
    bandwidth: Optional[float] = None
    rp_dims: tuple = (16, 32, 64, 128, 256, 512)
    output_path: Optional[str] = None

    @property
    def ssge(self) -> SsgeConfig:
        return SsgeConfig(bandwidth=self.bandwidth, mass_threshold=self.mass_threshold)


def _command_defaults(command):
    if command == "scorecheck":
        return {"dims": (1,)}
    if command == "rp-ablation":
        return {"dims": (512,), "rho_grid": (0.5,)}
    return {}


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


_PARSERS = {
    "seed": int, "n": int, "dims": _int_list, "rho_grid": _float_list,
    "mass_threshold": float, "bandwidth": float, "rp_dims": _int_list,
    "output_path": str,
}
_ALIASES = {"threshold": "mass_threshold", "out": "output_path", "rho": "rho_grid"}


def _canonical_key(key):
    key = key.strip().replace("-", "_")
    return _ALIASES.get(key, key)


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = _canonical_key(key)
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, value.strip())
    return values


def _parse_value(key, text):
    try:
        return _PARSERS[key](text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    if cfg.seed < 0:
        raise ConfigError("seed must be >= 0")
    if cfg.n < 2:
        raise ConfigError("n must be >= 2")
    if not cfg.dims or any(d < 1 for d in cfg.dims):
        raise ConfigError("dims must be a non-empty list of integers >= 1")
    if not cfg.rho_grid or any(not abs(r) < 1 for r in cfg.rho_grid):
        raise ConfigError("rho values must lie strictly inside (-1, 1)")
    if not 0 < cfg.mass_threshold <= 1:
        raise ConfigError("threshold must lie in (0, 1]")
    if cfg.bandwidth is not None and not cfg.bandwidth > 0:
        raise ConfigError("bandwidth must be > 0")
    if cfg.command == "rp-ablation":
        if not cfg.rp_dims or any(k < 1 for k in cfg.rp_dims):
            raise ConfigError("rp_dims must be a non-empty list of integers >= 1")
        if max(cfg.rp_dims) > cfg.dims[0]:
            raise ConfigError(
                f"rp_dims contains k={max(cfg.rp_dims)} > d={cfg.dims[0]}")
    return cfg


def build_config(command, file_values=None, flag_values=None) -> RunConfig:
    """Merge built-in defaults < command defaults < config file < flags."""
    merged = dict(_command_defaults(command))
    for source in (file_values or {}, flag_values or {}):
        merged.update({k: v for k, v in source.items() if v is not None})
    return validate(RunConfig(command=command, **merged))


def fmt(value) -> str:
    """Six significant digits; scientific (lowercase) below 1e-4 or from 1e6 up."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    if v == 0:
        return "0"
    return f"{v:.6g}"


def _derive_seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _rel_err(estimate, target):
    err = abs(estimate - target)
    return err / abs(target) if target != 0 else err


# -- commands -------------------------------------------------------------

def cmd_scorecheck(cfg: RunConfig):
    """Score RMSE against ``-x`` for standard normals, over growing sample sizes.

    Each row averages ``SCORECHECK_REPEATS`` independently seeded fits.
    """
    rows, ok = [], True
    for di, d in enumerate(cfg.dims):
        q_rng = np.random.default_rng(_derive_seed(cfg.seed, di, 0xA11))
        Q = q_rng.uniform(-2.0, 2.0, size=(SCORECHECK_QUERIES, d))
        rmses = []
        for M in SCORECHECK_SIZES:
            errs, resids = [], []
            for rep in range(SCORECHECK_REPEATS):
                rng = np.random.default_rng(_derive_seed(cfg.seed, di, M, rep))
                X = rng.standard_normal((M, d))
                est = fit(X, cfg.ssge)
                errs.append(np.sqrt(np.mean((est.score(Q) + Q) ** 2)))
                resids.append(stein_residual(est.kernel, X, est.score(X)))
            rmse, resid = float(np.mean(errs)), float(np.mean(resids))
            rmses.append(rmse)
            ok &= resid <= SCORECHECK_RESIDUAL_MAX
            rows.append(["std_normal", d, M, rmse, resid])
        ok &= all(b <= a for a, b in zip(rmses, rmses[1:]))
    return rows, ok


def toy_point(d, rho, n, cfg: RunConfig, data_seed, mige_seed, projector=None):
    """One circumstance-III run on the correlated-Gaussian toy problem."""
    X = np.random.default_rng(data_seed).standard_normal((n, d))
    enc = GaussianChannelEncoder(rho, d)
    return mi_grad_circ3(enc, X, L=1, cfg=cfg.ssge, seed=mige_seed, projector=projector)


def toy_tolerance(d, rho, estimate):
    """Pass if within 20% relative, or within an absolute floor ``0.1 sqrt(d/5)``."""
    target = analytic_mi_grad(ToyProblem(d, rho))
    err = abs(estimate - target)
    return err <= 0.2 * abs(target) or err <= 0.1 * math.sqrt(d / 5)


def cmd_toy(cfg: RunConfig):
    rows, ok = [], True
    for di, d in enumerate(cfg.dims):
        for ri, rho in enumerate(cfg.rho_grid):
            target = analytic_mi_grad(ToyProblem(d, rho))
            for rep in range(TOY_REPEATS):
                base = cfg.seed + rep
                report = toy_point(d, rho, cfg.n, cfg,
                                   _derive_seed(base, di, ri, 0), _derive_seed(base, di, ri, 1))
                est = float(report.gradient[0])
                ok &= toy_tolerance(d, rho, est)
                rows.append([d, rho, cfg.n, base, est, target, _rel_err(est, target),
                             report.diagnostics.j_used, report.diagnostics.eigen_mass])
                log.info("toy d=%d rho=%.2f seed=%d est=%.4f target=%.4f",
                         d, rho, base, est, target)
    return rows, ok


def _gradcheck_row(case, index, estimate, reference, abs_tol=None, rel_tol=None):
    err = abs(estimate - reference)
    rel = _rel_err(estimate, reference)
    passed = (abs_tol is None or err <= abs_tol) and (rel_tol is None or rel <= rel_tol)
    return [case, index, estimate, reference, err, rel], passed


# (a, b, var_h, var_z) for h = a x + noise, z = b h + noise
CHAIN_CASE = (1.0, 1.0, 0.5, 0.5)


def cmd_gradcheck(cfg: RunConfig):
    n, rows, ok = cfg.n, [], True

    def add(row_ok):
        nonlocal ok
        row, passed = row_ok
        rows.append(row)
        ok &= passed

    X = np.random.default_rng(_derive_seed(cfg.seed, 1)).standard_normal((n, 1))

    for sigma, tol in ((1.0, 0.1), (2.0, 0.08)):
        rep = entropy_grad(LinearEncoder([[sigma]]), X, cfg.ssge)
        ref = finite_diff(lambda t: gaussian_entropy([[t[0] ** 2]]), [sigma])[0]
        add(_gradcheck_row(f"entropy_scale_sigma{sigma:g}", 0, rep.gradient[0], ref, abs_tol=tol))

    rho = 0.5
    rep = cond_entropy_grad(GaussianChannelEncoder(rho), X, 1, cfg.ssge,
                            seed=_derive_seed(cfg.seed, 2))
    ref = finite_diff(lambda t: gaussian_entropy([[1.0 - t[0] ** 2]]), [rho])[0]
    add(_gradcheck_row("cond_entropy_rho0.5", 0, rep.gradient[0], ref, rel_tol=0.10))

    rep = mi_grad_circ3(LinearEncoder([[1.0]], noise_std=1.0), X, 1, cfg.ssge,
                        seed=_derive_seed(cfg.seed, 3))
    ref = finite_diff(lambda t: linear_gaussian_mi([[t[0]]], 1.0), [1.0])[0]
    add(_gradcheck_row("linear_gaussian_circ3", 0, rep.gradient[0], ref, rel_tol=0.15))

    a, b, var_h, var_z = CHAIN_CASE
    rep = mi_grad_circ2(LinearEncoder([[a]], noise_std=math.sqrt(var_h)),
                        LinearEncoder([[b]], noise_std=math.sqrt(var_z)),
                        X, cfg.ssge, seed=_derive_seed(cfg.seed, 4))
    ref = finite_diff(lambda t: linear_gaussian_chain_mi([[t[0]]], [[t[1]]], var_h, var_z), [a, b])
    for i in range(2):
        add(_gradcheck_row("linear_chain_circ2", i, rep.gradient[i], ref[i], rel_tol=0.15))

    rep = entropy_grad(IdentityEncoder(1), X, cfg.ssge)
    rows.append(["zero_params", "none", "", "", "", ""])
    ok &= rep.gradient.size == 0
    return rows, ok


def cmd_rp_ablation(cfg: RunConfig):
    """Toy gradient with the marginal score fitted through random projections.

    Every repeat also runs the unprojected estimator (``k = none``). Passes
    when the mean relative error at the largest ``k`` does not exceed the one
    at the smallest ``k``, and any ``k = d`` run is within 0.05 of the
    unprojected run.
    """
    d, rho = cfg.dims[0], cfg.rho_grid[0]
    target = analytic_mi_grad(ToyProblem(d, rho))
    rows, by_k, ok = [], {}, True
    for rep in range(ABLATION_REPEATS):
        data_seed = _derive_seed(cfg.seed, rep, 0)
        mige_seed = _derive_seed(cfg.seed, rep, 1)
        for k in (None, *cfg.rp_dims):
            projector = None if k is None else make_projector(
                d, k, _derive_seed(cfg.seed, rep, 2, k))
            start = time.monotonic()
            report = toy_point(d, rho, cfg.n, cfg, data_seed, mige_seed, projector)
            wall_ms = int(round((time.monotonic() - start) * 1000))
            est = float(report.gradient[0])
            rel = _rel_err(est, target)
            by_k.setdefault(k, []).append(rel)
            rows.append([d, "none" if k is None else k, rho, est, target, rel, wall_ms])
    means = {k: float(np.mean(v)) for k, v in by_k.items()}
    ok &= means[max(cfg.rp_dims)] <= means[min(cfg.rp_dims)]
    if d in by_k:
        ok &= all(abs(p - u) <= 0.05 for p, u in zip(by_k[d], by_k[None]))
    return rows, ok


RUNNERS = {
    "scorecheck": cmd_scorecheck,
    "toy": cmd_toy,
    "gradcheck": cmd_gradcheck,
    "rp-ablation": cmd_rp_ablation,
}


def render_csv(command, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADERS[command])
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def run(cfg: RunConfig):
    """Execute a validated config; returns ``(csv_text, tolerances_met)``."""
    rows, ok = RUNNERS[cfg.command](cfg)
    return render_csv(cfg.command, rows), bool(ok)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser():
    p = _Parser(prog="steinmi", description="Mutual-information gradient validation harness.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--dims", type=_int_list)
    p.add_argument("--rho-grid", dest="rho_grid", type=_float_list)
    p.add_argument("--threshold", dest="mass_threshold", type=float)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--rp-dims", dest="rp_dims", type=_int_list)
    p.add_argument("--out", dest="output_path")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        file_values = read_config_file(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in _PARSERS}
        cfg = build_config(args.command, file_values, flags)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        out = open(cfg.output_path, "w", encoding="utf-8", newline="") if cfg.output_path else None
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    text, ok = run(cfg)
    try:
        if out is None:
            sys.stdout.write(text)
        else:
            with out:
                out.write(text)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not ok:
        print("tolerance check failed", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
