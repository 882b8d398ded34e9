"""Quadratic certificates for the parameter-scheduled observer.

A certificate bundles a Lyapunov matrix P, a diagonal multiplier M for the
slope-restricted loop nonlinearity, scalar coefficients (kappa_x, kappa_v,
kappa_w) and the affine gain schedule.  The design inequality is a symmetric
block matrix, assembled per pair (true parameter p, scheduled parameter ph):

        [ -P        *            *            *           *        ]
        [ -Acl'P    kx/2 I-P/2   *            *           *        ]
    S = [ -G'P      M Hcl / 2    -M Lam^-1    *           *        ]  <= 0,
        [  B'P      0            0            -kv/2 I     *        ]
        [  L'P      0            -K'M/2       0           -kw/2 I  ]

with Acl = A(ph) + L(ph) C and Hcl = H + K(ph) C.  Because every block is
jointly affine in (p, ph), negative semidefiniteness at the vertex pairs of
the parameter box implies it on the whole box; the checker verifies exactly
those vertex pairs (plus an optional dense audit grid).

Eliminating the leading block by a Schur complement shows that S <= 0 with
P > 0 is equivalent to Q' P Q <= R with Q = [Acl  G  -B  -L] and R the
negated trailing block grid of S; both sides of that reduction are exposed
here so the identity can be checked numerically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .model import ConfigurationError, ParameterBox, PlantConfig
from .observer import GainSchedule

NSD_TOLERANCE = 1e-9

_CERTIFICATE_KEYS = ("L0", "L1", "K0", "K1", "P", "M", "kappa_x", "kappa_v", "kappa_w")


@dataclass(frozen=True)
class Certificate:
    """Candidate observer certificate.

    Construction enforces shape constraints (P symmetric, M diagonal positive,
    positive coefficients); whether the certificate actually holds over a
    parameter box is established by :func:`check_certificate`.
    """

    p_matrix: np.ndarray
    m_matrix: np.ndarray
    kappa_x: float
    kappa_v: float
    kappa_w: float
    schedule: GainSchedule

    def __post_init__(self):
        p = np.array(self.p_matrix, dtype=float, copy=True)
        m = np.array(self.m_matrix, dtype=float, copy=True)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ConfigurationError("P must be a square matrix")
        if not np.all(np.isfinite(p)):
            raise ConfigurationError("P has non-finite entries")
        if np.max(np.abs(p - p.T)) > 1e-12:
            raise ConfigurationError("P must be symmetric (within 1e-12)")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigurationError("M must be a square matrix")
        if not np.all(np.isfinite(m)):
            raise ConfigurationError("M has non-finite entries")
        if np.max(np.abs(m - np.diag(np.diag(m)))) > 1e-12:
            raise ConfigurationError("M must be diagonal")
        if np.any(np.diag(m) <= 0.0):
            raise ConfigurationError("M must have positive diagonal entries")
        for name in ("kappa_x", "kappa_v", "kappa_w"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0.0:
                raise ConfigurationError(f"{name} must be a positive number")
            object.__setattr__(self, name, value)
        p.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "p_matrix", p)
        object.__setattr__(self, "m_matrix", m)


def load_certificate(source) -> Certificate:
    """Load a certificate from a JSON file path, JSON text, or a parsed dict."""
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"certificate file is not valid JSON: {exc}") from exc
    for key in _CERTIFICATE_KEYS:
        if key not in data:
            raise ConfigurationError(f"certificate is missing required field {key!r}")
    schedule = GainSchedule(
        l0=np.array(data["L0"], dtype=float),
        l1=np.array(data["L1"], dtype=float),
        k0=np.array(data["K0"], dtype=float),
        k1=np.array(data["K1"], dtype=float),
    )
    return Certificate(
        p_matrix=np.array(data["P"], dtype=float),
        m_matrix=np.array(data["M"], dtype=float),
        kappa_x=data["kappa_x"],
        kappa_v=data["kappa_v"],
        kappa_w=data["kappa_w"],
        schedule=schedule,
    )


def certificate_to_dict(cert: Certificate, meta: dict | None = None) -> dict:
    data = {
        "L0": cert.schedule.l0.tolist(),
        "L1": cert.schedule.l1.tolist(),
        "K0": cert.schedule.k0.tolist(),
        "K1": cert.schedule.k1.tolist(),
        "P": cert.p_matrix.tolist(),
        "M": cert.m_matrix.tolist(),
        "kappa_x": cert.kappa_x,
        "kappa_v": cert.kappa_v,
        "kappa_w": cert.kappa_w,
    }
    if meta is not None:
        data["meta"] = meta
    return data


def save_certificate(cert: Certificate, path, meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(certificate_to_dict(cert, meta), indent=2) + "\n")


def _check_dimensions(cert: Certificate, plant: PlantConfig) -> None:
    n_x, n_y, n_phi = plant.n_x, plant.n_y, plant.n_phi
    if cert.p_matrix.shape != (n_x, n_x):
        raise ConfigurationError("P has the wrong dimension for this plant")
    if cert.m_matrix.shape != (n_phi, n_phi):
        raise ConfigurationError("M has the wrong dimension for this plant")
    if cert.schedule.l0.shape != (n_x, n_y):
        raise ConfigurationError("L gains have the wrong dimension for this plant")
    if cert.schedule.k0.shape != (n_phi, n_y):
        raise ConfigurationError("K gains have the wrong dimension for this plant")


def assemble_design_matrix(cert: Certificate, p, p_hat, plant: PlantConfig) -> np.ndarray:
    """Assemble the symmetric design matrix at the pair (p, p_hat).

    Exactly symmetric by construction: upper blocks are transposes of the
    lower ones.
    """
    _check_dimensions(cert, plant)
    p_val = float(np.asarray(p).reshape(-1)[0])
    ph_val = float(np.asarray(p_hat).reshape(-1)[0])
    big_p = cert.p_matrix
    big_m = cert.m_matrix
    c = plant.c_matrix
    l = cert.schedule.l_gain(ph_val)
    k = cert.schedule.k_gain(ph_val)
    a_cl = plant.a_matrix(ph_val) + l @ c
    h_cl = plant.h_matrix + k @ c
    g = plant.g_matrix(ph_val)
    b = plant.b_matrix(p_val)
    lam_inv = np.diag(1.0 / np.diag(plant.slope_matrix))
    n_x, n_phi, n_v, n_w = plant.n_x, plant.n_phi, plant.n_v, plant.n_w

    s11 = -big_p
    s21 = -a_cl.T @ big_p
    s31 = -g.T @ big_p
    s41 = b.T @ big_p
    s51 = l.T @ big_p
    s22 = 0.5 * cert.kappa_x * np.eye(n_x) - 0.5 * big_p
    s32 = 0.5 * big_m @ h_cl
    s33 = -big_m @ lam_inv
    s42 = np.zeros((n_v, n_x))
    s43 = np.zeros((n_v, n_phi))
    s44 = -0.5 * cert.kappa_v * np.eye(n_v)
    s52 = np.zeros((n_w, n_x))
    s53 = -0.5 * k.T @ big_m
    s54 = np.zeros((n_w, n_v))
    s55 = -0.5 * cert.kappa_w * np.eye(n_w)

    return np.block(
        [
            [s11, s21.T, s31.T, s41.T, s51.T],
            [s21, s22, s32.T, s42.T, s52.T],
            [s31, s32, s33, s43.T, s53.T],
            [s41, s42, s43, s44, s54.T],
            [s51, s52, s53, s54, s55],
        ]
    )


@dataclass(frozen=True)
class NsdVerdict:
    passed: bool
    max_eigenvalue: float


def check_nsd(matrix, tol: float = NSD_TOLERANCE) -> NsdVerdict:
    """Negative-semidefiniteness verdict: pass iff the largest eigenvalue is <= tol.

    Uses a symmetric eigensolver, so verdicts are reproducible bit-for-bit on
    one platform.  Raises ``ValueError`` for inputs that are not symmetric
    within ``tol`` (relative to the largest entry).
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if float(np.max(np.abs(matrix - matrix.T))) > tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    max_eig = float(np.linalg.eigvalsh(matrix)[-1])
    return NsdVerdict(passed=max_eig <= tol, max_eigenvalue=max_eig)


def schur_reduce(design_matrix, n_x: int) -> np.ndarray:
    """Reduced bound obtained by eliminating the leading block of the design matrix.

    With ``S = [[-P, E'], [E, D]]`` and ``P > 0``, ``S <= 0`` is equivalent to
    ``E P^-1 E' <= -D``; this returns ``-D``.  Raises ``ValueError`` when the
    leading block is not negative definite.
    """
    s = np.asarray(design_matrix, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] <= n_x:
        raise ValueError("design matrix and n_x are inconsistent")
    big_p = -s[:n_x, :n_x]
    eigs = np.linalg.eigvalsh(big_p)
    if eigs[0] <= 0.0:
        raise ValueError("leading block is not negative definite (P is not positive definite)")
    return -s[n_x:, n_x:]


def schur_gap(design_matrix, n_x: int) -> float:
    """Largest eigenvalue of ``E P^-1 E' - schur_reduce(S)``.

    Non-positive (up to roundoff) exactly when the design matrix is negative
    semidefinite, which makes this a numerical consistency check of the
    Schur-complement reduction.
    """
    s = np.asarray(design_matrix, dtype=float)
    reduced = schur_reduce(s, n_x)
    big_p = -s[:n_x, :n_x]
    e = s[n_x:, :n_x]
    quad = e @ np.linalg.solve(big_p, e.T)
    quad = 0.5 * (quad + quad.T)
    return float(np.linalg.eigvalsh(quad - reduced)[-1])


@dataclass(frozen=True)
class PairResult:
    p: tuple[float, ...]
    p_hat: tuple[float, ...]
    max_eigenvalue: float
    schur_gap: float
    passed: bool


@dataclass(frozen=True)
class CertificateReport:
    positivity_ok: bool
    p_eig_min: float
    p_eig_max: float
    pairs: tuple[PairResult, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.positivity_ok and all(pair.passed for pair in self.pairs)

    def failures(self) -> list[str]:
        lines = []
        if not self.positivity_ok:
            lines.append(
                f"positivity: lambda_min(P) = {self.p_eig_min:.6e} fails the "
                f"relative threshold {self.tolerance:g} * lambda_max(P)"
            )
        for pair in self.pairs:
            if not pair.passed:
                lines.append(
                    f"pair p={pair.p} p_hat={pair.p_hat}: "
                    f"lambda_max = {pair.max_eigenvalue:.6e} > {self.tolerance:g}"
                )
        return lines

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "positivity_ok": self.positivity_ok,
            "p_eig_min": self.p_eig_min,
            "p_eig_max": self.p_eig_max,
            "tolerance": self.tolerance,
            "pairs": [
                {
                    "p": list(pair.p),
                    "p_hat": list(pair.p_hat),
                    "max_eigenvalue": pair.max_eigenvalue,
                    "schur_gap": pair.schur_gap,
                    "passed": pair.passed,
                }
                for pair in self.pairs
            ],
        }

    def render_text(self) -> str:
        lines = [
            f"certificate check: {'PASS' if self.passed else 'FAIL'}",
            f"  P eigenvalues: min {self.p_eig_min:.6e}, max {self.p_eig_max:.6e} "
            f"(positivity {'ok' if self.positivity_ok else 'FAILED'})",
            f"  tolerance: {self.tolerance:g}",
            f"  checked pairs: {len(self.pairs)}",
        ]
        for pair in self.pairs:
            lines.append(
                f"  p={tuple(pair.p)} p_hat={tuple(pair.p_hat)}: "
                f"lambda_max {pair.max_eigenvalue:+.6e}, "
                f"schur gap {pair.schur_gap:+.6e} "
                f"[{'ok' if pair.passed else 'FAIL'}]"
            )
        for line in self.failures():
            lines.append(f"  failure: {line}")
        return "\n".join(lines) + "\n"


def check_certificate(
    cert: Certificate,
    box: ParameterBox,
    plant: PlantConfig,
    tol: float = NSD_TOLERANCE,
    grid: int = 0,
) -> CertificateReport:
    """Check a certificate over a parameter box.

    Verifies that P is positive definite (relative threshold ``tol`` times its
    largest eigenvalue) and that the design matrix is negative semidefinite at
    every vertex pair (p, p_hat) of the box.  Vertex pairs are sufficient for
    plants and gains affine in the parameter; ``grid >= 2`` adds a dense
    per-axis audit grid for models where that assumption is in doubt.
    """
    _check_dimensions(cert, plant)
    p_eigs = np.linalg.eigvalsh(cert.p_matrix)
    p_min, p_max = float(p_eigs[0]), float(p_eigs[-1])
    positivity_ok = p_max > 0.0 and p_min >= tol * p_max

    points = [tuple(float(x) for x in v) for v in box.vertices()]
    if grid >= 2:
        axes = [np.linspace(lo, hi, grid) for lo, hi in zip(box.lower, box.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        extra = np.stack([m.ravel() for m in mesh], axis=-1)
        seen = set(points)
        for row in extra:
            key = tuple(float(v) for v in row)
            if key not in seen:
                seen.add(key)
                points.append(key)

    pairs = []
    for p_true, p_sched in product(points, points):
        s = assemble_design_matrix(cert, np.array(p_true), np.array(p_sched), plant)
        verdict = check_nsd(s, tol)
        gap = schur_gap(s, plant.n_x) if positivity_ok else float("nan")
        pairs.append(
            PairResult(
                p=p_true,
                p_hat=p_sched,
                max_eigenvalue=verdict.max_eigenvalue,
                schur_gap=gap,
                passed=verdict.passed,
            )
        )
    return CertificateReport(
        positivity_ok=positivity_ok,
        p_eig_min=p_min,
        p_eig_max=p_max,
        pairs=tuple(pairs),
        tolerance=tol,
    )
