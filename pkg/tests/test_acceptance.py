"""Acceptance gate: ten end-to-end checks with their tolerances and time budgets.

Run with ``pytest tests/test_acceptance.py -v``; each check prints one
``PASS``/``FAIL`` line to the terminal regardless of output capture.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from parisian import (
    Exponential,
    ParisianProblem,
    PiecewiseErlangMixture,
    PiecewiseExponential,
    RiskModel,
    ScaleEvaluator,
)
from parisian.simulation import SimConfig, simulate_joint_lt, simulate_ruin

MODEL = RiskModel(2.0, 1.0, Exponential(1.0))
ANCHOR = 1.0 - 1.0 / math.sqrt(2.0)  # ruin at u=0 with unit delay rate, see oracles.parisian_ruin_exp


@pytest.fixture
def report(pytestconfig, capsys):
    """Print one verdict line, then fail the test if any check failed."""
    start = time.perf_counter()

    def done(number, title, checks, budget):
        elapsed = time.perf_counter() - start
        checks = dict(checks)
        checks[f"runtime {elapsed:.2f}s < {budget:g}s"] = elapsed < budget
        ok = all(checks.values())
        failed = [name for name, good in checks.items() if not good]
        detail = "; ".join(checks) if ok else "failed: " + "; ".join(failed)
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}  ({detail})")
        assert ok, failed

    return done


def test_criterion_01_scale_laplace_identity(report):
    ev = ScaleEvaluator(MODEL)
    nodes, weights = np.polynomial.legendre.leggauss(40)
    worst = 0.0
    for q in (0.0, 0.5, 1.0):
        phi = MODEL.phi_inverse(q)
        for off in (0.5, 1.0, 2.0):
            beta = phi + off
            # direct integral on unit panels up to where exp(-off x) drops below 1e-18
            top = math.ceil(42.0 / off)
            x = (np.arange(top)[:, None] + 0.5 * (nodes[None, :] + 1.0)).ravel()
            w = np.tile(0.5 * weights, top)
            direct = float(np.sum(w * np.exp(-beta * x) * ev.wq_scale(q, x)))
            worst = max(worst, abs(direct - 1.0 / (float(MODEL.cumulant(beta)) - q)))
    report(1, "scale-function Laplace identity", {f"max error {worst:.1e} < 1e-6": worst < 1e-6}, 5)


def test_criterion_02_closed_form_anchor(report):
    p = ParisianProblem(MODEL, PiecewiseExponential.constant(1.0))
    closed = float(p.ruin_prob(0.0))
    general = float(p.ruin_prob(0.0, "quadrature"))
    report(2, "closed-form anchor and general route", {
        f"closed {closed:.9f} within 1e-6 of {ANCHOR:.7f}": abs(closed - ANCHOR) < 1e-6,
        f"general route differs by {abs(general - closed):.1e} < 1e-6": abs(general - closed) < 1e-6,
    }, 10)


def test_criterion_03_reductions(report):
    us = np.array([0.0, 0.5, 1.0, 3.0, 8.0])
    immediate = ParisianProblem(MODEL, PiecewiseExponential((), (math.inf,)))
    gap = float(np.max(np.abs(immediate.ruin_prob(us) - immediate.classical_ruin(us))))
    patient = ParisianProblem(MODEL, PiecewiseExponential.constant(1e-8))
    top = float(np.max(patient.ruin_prob(us)))
    report(3, "reduction identities", {
        f"infinite rate vs classical {gap:.1e} <= 1e-12": gap <= 1e-12,
        f"tiny rate max ruin {top:.1e} < 1e-6": top < 1e-6,
    }, 1)


def test_criterion_04_ruin_vs_monte_carlo(report):
    p = ParisianProblem(MODEL, PiecewiseExponential.constant(1.0))
    est = simulate_ruin(MODEL, PiecewiseExponential.constant(1.0), SimConfig(u=0.0, n_paths=1_000_000, seed=2024))
    z = (est.value - float(p.ruin_prob(0.0))) / est.stderr
    report(4, "ruin probability vs Monte Carlo", {
        f"MC {est.value:.5f} +- {est.stderr:.1e}, |z| = {abs(z):.2f} <= 3": abs(z) <= 3,
    }, 60)


def test_criterion_05_joint_transform_vs_monte_carlo(report):
    kernel = PiecewiseExponential.constant(1.0)
    analytic = ParisianProblem(MODEL, kernel).joint_lt(1.0, 0.5, 0.5, 10.0)
    est = simulate_joint_lt(MODEL, kernel, SimConfig(u=1.0, b=10.0, v=0.5, w=0.5, n_paths=1_000_000, seed=2025))
    z = (est.value - analytic) / est.stderr
    report(5, "joint transform vs Monte Carlo", {
        f"MC {est.value:.5f} +- {est.stderr:.1e}, analytic {analytic:.5f}, |z| = {abs(z):.2f} <= 3": abs(z) <= 3,
    }, 120)


def test_criterion_06_transform_reduces_to_ruin(report):
    p = ParisianProblem(MODEL, PiecewiseExponential.constant(1.0))
    b = p.default_b()
    gaps = [abs(p.joint_lt(u, 0.0, 0.0, b) - float(p.ruin_prob(u))) for u in (0.0, 1.0, 2.5, 5.0)]
    report(6, "undiscounted transform vs ruin probability", {
        f"b = {b:.3f}, max gap {max(gaps):.1e} < 1e-3": max(gaps) < 1e-3,
    }, 60)


def test_criterion_07_cross_identity(report):
    ev = ScaleEvaluator(MODEL)
    worst = 0.0
    for q in (0.0, 0.5, 2.0):
        for y in (0.3, 1.0, 3.0):
            for t in (0.5, 2.0, 6.0):
                lhs = math.exp(-q * t) * ev.lambda_q(q, -y, t)
                worst = max(worst, abs(lhs - ev.upcross_transform(q, y, t)))
    report(7, "incomplete up-crossing transform identity", {f"max error {worst:.1e} < 1e-6": worst < 1e-6}, 30)


def _richardson(k, r, xs, h=5e-3):
    def f(rr):
        return np.exp(MODEL.phi_inverse(rr) * xs)

    def diff(hh):
        if k == 1:
            return (f(r + hh) - f(r - hh)) / (2 * hh)
        if k == 2:
            return (f(r + hh) - 2 * f(r) + f(r - hh)) / hh**2
        return (f(r + 2 * hh) - 2 * f(r + hh) + 2 * f(r - hh) - f(r - 2 * hh)) / (2 * hh**3)

    return (-1) ** k * (4 * diff(h / 2) - diff(h)) / (3 * math.factorial(k))


def test_criterion_08_erlang_mixture_machinery(report):
    kernel = PiecewiseErlangMixture(
        (-1.0,), (((0.4, 1, 0.5), (0.6, 3, 2.0)), ((0.3, 1, math.inf), (0.7, 2, 1.5)))
    )
    p = ParisianProblem(MODEL, kernel)
    xs = np.array([-0.3, -1.5, -4.0])
    jet_err = max(
        float(np.max(np.abs(p.phi_ell(k, r, xs) - _richardson(k, r, xs)))) for k in (1, 2, 3) for r in (0.5, 1.5, 2.0)
    )
    grid = np.linspace(-4.0, -0.01, 20)
    k_err = float(np.max(np.abs(p.k_fn(grid) - np.array([p.k_fn(x, "quadrature") for x in grid]))))
    analytic = float(p.ruin_prob(0.0))
    est = simulate_ruin(MODEL, kernel, SimConfig(u=0.0, n_paths=1_000_000, seed=2026))
    z = (est.value - analytic) / est.stderr
    report(8, "Erlang-mixture kernel machinery", {
        f"derivative error {jet_err:.1e} < 1e-7": jet_err < 1e-7,
        f"K sums vs quadrature {k_err:.1e} < 1e-6": k_err < 1e-6,
        f"two-cell MC |z| = {abs(z):.2f} <= 3": abs(z) <= 3,
    }, 120)


def test_criterion_09_first_deficit_density(report):
    p = ParisianProblem(MODEL, PiecewiseExponential.constant(1.0))
    xs = np.array([-0.05, -0.5, -1.3, -2.7, -6.0])
    us = (0.0, 0.7, 2.0, 4.5)
    dens_err = max(
        float(np.max(np.abs(p.first_deficit_density(u, xs, "general") - p.first_deficit_density(u, xs)))) for u in us
    )
    mass_err = 0.0
    for u in us:
        mass, _ = integrate.quad(lambda x: float(p.first_deficit_density(u, x)), -np.inf, 0.0, epsabs=1e-13)
        mass_err = max(mass_err, abs(mass - float(p.classical_ruin(u))))
    report(9, "first-deficit density", {
        f"general vs closed {dens_err:.1e} < 1e-7 on 20 points": dens_err < 1e-7,
        f"mass vs classical ruin {mass_err:.1e} < 1e-8": mass_err < 1e-8,
    }, 10)


def test_criterion_10_reproducible_cli_output(report, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "model": {"c": 2, "lambda": 1, "claims": {"type": "exponential", "alpha": 1}},
        "kernel": {"type": "piecewise_erlang_mixture", "breakpoints": [-1],
                   "cells": [[{"weight": 0.4, "shape": 1, "rate": 0.5}, {"weight": 0.6, "shape": 3, "rate": 2.0}],
                             [{"weight": 0.3, "shape": 1, "rate": "inf"}, {"weight": 0.7, "shape": 2, "rate": 1.5}]]},
        "task": {"u": [0, 1.5]},
        "sim": {"n_paths": 40000, "seed": 77},
    }))
    env = dict(os.environ, NUMBA_NUM_THREADS="4")
    same = {}
    for command, ext in (("simulate", "csv"), ("compare", "json")):
        blobs = []
        for run, workers in enumerate(("1", "2", "4", "4")):
            dest = tmp_path / f"{command}-{run}.{ext}"
            subprocess.run(
                [sys.executable, "-m", "parisian.cli", command, str(cfg), "--workers", workers, "--out", str(dest)],
                check=True, env=env, capture_output=True,
            )
            blobs.append(dest.read_bytes())
        same[f"{command} identical over workers 1, 2, 4 and a repeat"] = len(set(blobs)) == 1
    report(10, "byte-identical CLI output", same, 60)
