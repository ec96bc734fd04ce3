"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line to the terminal summary with the measured
quantity next to its tolerance. The statistical criteria use n = 4000 fits
and dominate the suite's runtime.
"""
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from steinmi import cli
from steinmi.cli import build_config, cmd_rp_ablation, cmd_scorecheck, cmd_toy, render_csv
from steinmi.eigen import sym_eig
from steinmi.encoders import GaussianChannelEncoder, LinearEncoder, TanhMlpEncoder
from steinmi.kernels import RbfKernel, gram, median_heuristic
from steinmi.mige import cond_entropy_grad, entropy_grad, mi_grad_circ2, pjvp_check
from steinmi.oracles import finite_diff, linear_gaussian_chain_mi
from steinmi.projection import make_projector, project
from steinmi.ssge import stein_residual

TOY_N = 4000


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="session")
def toy_d5():
    cfg = build_config("toy", None, {"dims": (5,), "n": TOY_N, "seed": 0})
    rows, _ = cmd_toy(cfg)
    return rows


def _by_rho(rows):
    out = {}
    for d, rho, n, seed, est, target, rel, *_ in rows:
        out.setdefault(rho, []).append((seed, est, target, rel))
    return out


def test_criterion_01_toy_fidelity_d5(toy_d5):
    by_rho = _by_rho(toy_d5)
    worst_rel = max(r for rho in (-0.7, -0.5, -0.3, 0.3, 0.5, 0.7) for *_, r in by_rho[rho])
    worst_abs0 = max(abs(est) for _, est, _, _ in by_rho[0.0])
    record(1, "toy gradient d=5, n=4000",
           worst_rel <= 0.15 and worst_abs0 <= 0.1,
           f"max rel err {worst_rel:.4f} (<= 0.15), max |est| at rho=0 {worst_abs0:.4f} (<= 0.1)")


@pytest.mark.slow
def test_criterion_02_toy_fidelity_d20():
    cfg = build_config("toy", None, {"dims": (20,), "n": TOY_N, "seed": 0,
                                     "rho_grid": (-0.7, -0.5, 0.5, 0.7)})
    rows, _ = cmd_toy(cfg)
    worst = max(r[6] for r in rows)
    record(2, "toy gradient d=20, n=4000", worst <= 0.20, f"max rel err {worst:.4f} (<= 0.20)")


def test_criterion_03_smooth_monotone(toy_d5):
    seeds = sorted({r[3] for r in toy_d5})
    violations = 0
    for s in seeds:
        curve = [r[4] for r in toy_d5 if r[3] == s]  # grid order is ascending rho
        violations += int(np.sum(np.diff(curve) < 0))
    record(3, "19-point rho curve monotone over 3 seeds", violations <= 2,
           f"{violations} adjacent-pair violations (<= 2)")


def test_criterion_04_score_consistency():
    rows, _ = cmd_scorecheck(build_config("scorecheck"))
    rmse = [r[3] for r in rows]
    ok = all(b <= a for a, b in zip(rmse, rmse[1:])) and rmse[-1] <= 0.3
    record(4, "score RMSE non-increasing in M, <= 0.3 at M=1600", ok,
           "rmse " + ", ".join(f"{v:.4f}" for v in rmse))


def test_criterion_05_stein_residual():
    X = np.random.default_rng(0).standard_normal((5000, 1))
    k = RbfKernel(median_heuristic(X))
    good, bad = stein_residual(k, X, -X), stein_residual(k, X, X)
    record(5, "Stein residual at M=5000", good <= 0.05 and bad > 0.5,
           f"true score {good:.4f} (<= 0.05), flipped sign {bad:.4f} (> 0.5)")


def test_criterion_06_entropy_oracle():
    X = np.random.default_rng(1).standard_normal((2000, 1))
    g1 = entropy_grad(LinearEncoder([[1.0]]), X).gradient[0]
    g2 = entropy_grad(LinearEncoder([[2.0]]), X).gradient[0]
    ok = abs(g1 - 1.0) <= 0.1 and abs(g2 - 0.5) <= 0.08
    record(6, "entropy gradient of z = sigma x, n=2000", ok,
           f"sigma=1: {g1:.4f} (1 +- 0.1), sigma=2: {g2:.4f} (0.5 +- 0.08)")


def test_criterion_07_conditional_entropy_oracle():
    X = np.random.default_rng(2).standard_normal((TOY_N, 1))
    g = cond_entropy_grad(GaussianChannelEncoder(0.5), X, L=1, seed=3).gradient[0]
    rel = abs(g + 2 / 3) / (2 / 3)
    record(7, "conditional entropy gradient, rho=0.5", rel <= 0.10,
           f"estimate {g:.4f} vs -0.6667, rel err {rel:.4f} (<= 0.10)")


@pytest.mark.slow
def test_criterion_08_two_stage_chain():
    a, b, var_h, var_z = cli.CHAIN_CASE
    X = np.random.default_rng(4).standard_normal((TOY_N, 1))
    rep = mi_grad_circ2(LinearEncoder([[a]], noise_std=np.sqrt(var_h)),
                        LinearEncoder([[b]], noise_std=np.sqrt(var_z)), X, seed=5)
    ref = finite_diff(lambda t: linear_gaussian_chain_mi([[t[0]]], [[t[1]]], var_h, var_z), [a, b])
    rel = np.abs(rep.gradient - ref) / np.abs(ref)
    record(8, "two-stage linear-Gaussian chain, n=4000", bool(np.all(rel <= 0.15)),
           f"estimate {np.round(rep.gradient, 4).tolist()} vs {np.round(ref, 4).tolist()}, "
           f"rel err {np.round(rel, 4).tolist()} (<= 0.15)")


def _band_fraction(d, k, seed, pairs=100):
    rng = np.random.default_rng([seed, 99])
    X = rng.standard_normal((2000, d))
    i = rng.choice(2000, size=pairs, replace=False)
    j = (i + 1 + rng.integers(0, 1999, size=pairs)) % 2000
    P = project(make_projector(d, k, seed), X)
    approx = np.sqrt(d / k) * np.linalg.norm(P[i] - P[j], axis=1)
    exact = np.linalg.norm(X[i] - X[j], axis=1)
    return float(np.mean(np.abs(approx / exact - 1) <= 0.2))


def test_criterion_09_random_projection_band():
    frac = _band_fraction(1024, 128, seed=0)
    means = [np.mean([_band_fraction(1024, k, s) for s in range(5)]) for k in (16, 64, 256)]
    ok = frac >= 0.95 and means[0] <= means[1] <= means[2]
    record(9, "distance band d=1024", ok,
           f"k=128 preserved {frac:.2f} (>= 0.95); mean over 5 seeds k=16/64/256 "
           + "/".join(f"{m:.3f}" for m in means) + " (non-decreasing)")


@pytest.mark.slow
def test_criterion_10_rp_ablation():
    cfg = build_config("rp-ablation", None, {"dims": (512,), "rp_dims": (16, 128, 512),
                                             "n": 1000, "seed": 0})
    rows, _ = cmd_rp_ablation(cfg)
    by_k = {}
    for _, k, _, _, _, rel, _ in rows:
        by_k.setdefault(k, []).append(rel)
    m16, m128 = np.mean(by_k[16]), np.mean(by_k[128])
    gap = max(abs(p - u) for p, u in zip(by_k[512], by_k["none"]))
    record(10, "projection ablation d=512, n=1000, 5 seeds", m128 <= m16 and gap <= 0.05,
           f"mean rel err k=16 {m16:.4f}, k=128 {m128:.4f} (k=128 <= k=16); "
           f"max |k=d - unprojected| {gap:.4f} (<= 0.05)")


def test_criterion_11_mechanical_invariants(tmp_path):
    rng = np.random.default_rng(11)
    encs = [LinearEncoder(rng.standard_normal((2, 3))),
            LinearEncoder(rng.standard_normal((2, 3)), noise_std=0.4),
            TanhMlpEncoder.random(3, 5, 2, rng),
            GaussianChannelEncoder(0.3, dim=3)]
    X = rng.standard_normal((8, 3))
    lin = 0.0
    for enc in encs:
        eps = enc.sample_noise(8, rng)
        V1, V2 = rng.standard_normal((2, 8, enc.output_dim))
        lhs = enc.pjvp(X, 2.0 * V1 - 3.0 * V2, eps)
        lin = max(lin, float(np.max(np.abs(lhs - 2.0 * enc.pjvp(X, V1, eps)
                                          + 3.0 * enc.pjvp(X, V2, eps)))))
    fd = max(pjvp_check(enc, X, step=1e-4) for enc in encs)

    psd = np.inf
    roundtrip = 0.0
    for s in range(20):
        Y = np.random.default_rng([s, 5]).standard_normal((60, 4))
        K = gram(RbfKernel(median_heuristic(Y)), Y)
        dec = sym_eig(K)
        psd = min(psd, float(dec.eigenvalues.min() / dec.eigenvalues.max()))
        roundtrip = max(roundtrip, float(np.max(np.abs(dec.reconstruct() - K))))

    cfg = build_config("toy", None, {"dims": (2,), "rho_grid": (-0.4, 0.0, 0.4), "n": 300})
    csv_a = render_csv("toy", cmd_toy(cfg)[0])
    csv_b = render_csv("toy", cmd_toy(cfg)[0])

    ok = lin <= 1e-10 and fd <= 1e-4 and psd >= -1e-8 and roundtrip <= 1e-8 and csv_a == csv_b
    record(11, "mechanical invariants", ok,
           f"pjvp linearity {lin:.1e} (<= 1e-10), pjvp vs FD {fd:.1e} (<= 1e-4), "
           f"min eig/max eig {psd:.1e} (>= -1e-8), round trip {roundtrip:.1e} (<= 1e-8), "
           f"CSV bitwise identical: {csv_a == csv_b}")
