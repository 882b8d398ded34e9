#!/usr/bin/env python3
"""Offline synthesis of the shipped observer gain certificate.

Solves the vertex-pair design inequality as a semidefinite program (cvxpy)
with the standard change of variables Y = P L and Z = M K, which keeps every
block linear in the decision variables, then recovers the affine gain pencils
and re-verifies the result with the package's own checker.  The output JSON is
committed as ``src/supobs/data/case_study_certificate.json``; this script is a
development tool, not part of the installed package.

Modes:
  optimize  - free affine gains, minimize kappa_v + 5 * kappa_w
  deadbeat  - gains pinned to L(p) = -A(p), K = -H; solve for P, M, kappas

Usage: python tools/synthesize_certificate.py [--mode optimize] [--out PATH]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import cvxpy as cp
import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from supobs.lmi import Certificate, certificate_to_dict, check_certificate  # noqa: E402
from supobs.model import PlantConfig  # noqa: E402
from supobs.observer import GainSchedule  # noqa: E402

KAPPA_X = 0.1
MARGIN = 1e-6  # enforced slack: S <= -MARGIN * I at every vertex pair


def design_matrix_expr(plant, p, ph, P, Y0, Y1, m, Z0, Z1, kv, kw):
    """The design inequality with Y = P L(ph) and Z = M K(ph) substituted in."""
    n_x, n_phi, n_v, n_w = plant.n_x, plant.n_phi, plant.n_v, plant.n_w
    a = plant.a_matrix(ph)
    g = plant.g_matrix(ph)
    b = plant.b_matrix(p)
    c = plant.c_matrix
    h = plant.h_matrix
    lam_inv = np.diag(1.0 / np.diag(plant.slope_matrix))
    y = Y0 + ph * Y1          # P L(ph)
    z = Z0 + ph * Z1          # M K(ph)

    s11 = -P
    s21 = -(a.T @ P + c.T @ y.T)      # -(A + L C)' P
    s31 = -g.T @ P
    s41 = b.T @ P
    s51 = y.T                          # L' P = (P L)'
    s22 = 0.5 * KAPPA_X * np.eye(n_x) - 0.5 * P
    s32 = 0.5 * (m @ h + z @ c)        # M (H + K C) / 2
    s33 = -m @ lam_inv
    s42 = np.zeros((n_v, n_x))
    s43 = np.zeros((n_v, n_phi))
    s44 = -0.5 * kv * np.eye(n_v)
    s52 = np.zeros((n_w, n_x))
    s53 = -0.5 * z.T                   # -(M K)' / 2
    s54 = np.zeros((n_w, n_v))
    s55 = -0.5 * kw * np.eye(n_w)
    return cp.bmat(
        [
            [s11, s21.T, s31.T, s41.T, s51.T],
            [s21, s22, s32.T, s42.T, s52.T],
            [s31, s32, s33, s43.T, s53.T],
            [s41, s42, s43, s44, s54.T],
            [s51, s52, s53, s54, s55],
        ]
    )


def synthesize(mode: str, plant: PlantConfig):
    n_x, n_phi, n_y = plant.n_x, plant.n_phi, plant.n_y
    lo, hi = plant.parameter_interval
    P = cp.Variable((n_x, n_x), symmetric=True)
    Y0 = cp.Variable((n_x, n_y))
    Y1 = cp.Variable((n_x, n_y))
    m_diag = cp.Variable(n_phi, pos=True)
    m = cp.diag(m_diag)
    Z0 = cp.Variable((n_phi, n_y))
    Z1 = cp.Variable((n_phi, n_y))
    kv = cp.Variable(pos=True)
    kw = cp.Variable(pos=True)

    constraints = [
        P >> 0.05 * np.eye(n_x),
        P << 50.0 * np.eye(n_x),
        m_diag >= 1e-3,
        m_diag <= 1e3,
        kv >= 1e-6,
        kw >= 1e-6,
    ]
    if mode == "deadbeat":
        # L(p) = -A(p) and K(p) = -H: Y_i = -P A_i, Z0 = -M H, Z1 = 0.
        ts = plant.sampling_time
        a0 = np.array([[1.0, ts], [0.0, 1.0]])
        a1 = -ts * np.array([[0.5, 0.5], [1.0, 1.0]])
        constraints += [
            Y0 == -P @ a0,
            Y1 == -P @ a1,
            Z0 == -m @ plant.h_matrix,
            Z1 == np.zeros((n_phi, n_y)),
        ]
    dim = 2 * n_x + n_phi + plant.n_v + plant.n_w
    for p in (lo, hi):
        for ph in (lo, hi):
            s = design_matrix_expr(plant, p, ph, P, Y0, Y1, m, Z0, Z1, kv, kw)
            constraints.append(s << -MARGIN * np.eye(dim))

    problem = cp.Problem(cp.Minimize(kv + 5 * kw), constraints)
    problem.solve(solver=cp.CLARABEL)
    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise RuntimeError(f"synthesis failed: {problem.status}")

    p_val = np.asarray(P.value)
    p_val = 0.5 * (p_val + p_val.T)
    m_val = np.diag(np.asarray(m_diag.value))
    l0 = np.linalg.solve(p_val, np.asarray(Y0.value))
    l1 = np.linalg.solve(p_val, np.asarray(Y1.value))
    k0 = np.asarray(Z0.value) / m_val.diagonal()[:, None]
    k1 = np.asarray(Z1.value) / m_val.diagonal()[:, None]
    schedule = GainSchedule(l0=l0, l1=l1, k0=k0, k1=k1)
    cert = Certificate(
        p_matrix=p_val,
        m_matrix=m_val,
        kappa_x=KAPPA_X,
        kappa_v=float(kv.value),
        kappa_w=float(kw.value),
        schedule=schedule,
    )
    meta = {
        "mode": mode,
        "solver": "CLARABEL",
        "objective_kappa_v_plus_5kappa_w": float(problem.value),
        "synthesis_margin": MARGIN,
    }
    return cert, meta


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mode", choices=("optimize", "deadbeat"), default="optimize")
    parser.add_argument(
        "--out",
        default=str(
            Path(__file__).resolve().parent.parent
            / "src/supobs/data/case_study_certificate.json"
        ),
    )
    args = parser.parse_args()

    plant = PlantConfig()
    cert, meta = synthesize(args.mode, plant)
    report = check_certificate(cert, plant.parameter_box(), plant)
    print(report.render_text())
    if not report.passed:
        print("recovered certificate failed re-verification; not writing output")
        return 1
    worst = max(pair.max_eigenvalue for pair in report.pairs)
    worst_gap = max(pair.schur_gap for pair in report.pairs)
    meta["reverified_max_eigenvalue"] = worst
    meta["reverified_max_schur_gap"] = worst_gap
    Path(args.out).write_text(json.dumps(certificate_to_dict(cert, meta), indent=2) + "\n")
    print(f"wrote {args.out}")
    print(f"worst vertex eigenvalue: {worst:.3e}; worst schur gap: {worst_gap:.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
