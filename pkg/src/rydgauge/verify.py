"""Invariant suite behind ``rydgauge verify``.

Every check returns ``(passed, detail)``; :func:`run_checks` collects them into
:class:`CheckResult` rows. The random positions are drawn from a fixed seed so
the table is reproducible.
"""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from . import adiabatic as ad
from . import boundstates as bs
from . import dynamics as dy
from . import gauge as g
from .model import (
    N_STATES,
    ModelParams,
    Position,
    build_basis,
    exchange_operator,
    grad_hint,
    hint,
    jz_matrix,
    stark_hamiltonian,
    vdd_matrix,
)

SEED = 20130612


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def random_positions(n: int, rng: np.random.Generator, r_range=(0.8, 3.0)) -> list[Position]:
    """Random positions with R in ``r_range``, kept away from the z axis."""
    out = []
    while len(out) < n:
        R = rng.uniform(*r_range)
        theta = rng.uniform(0.2, np.pi - 0.2)
        out.append(Position(R * np.sin(theta), R * np.cos(theta), rng.uniform(-np.pi, np.pi)))
    return out


def plaquette_flux(vectors: list[np.ndarray]) -> float:
    """Berry flux through a closed loop of states, -arg of the product of overlaps."""
    prod = 1.0 + 0j
    for a, b in zip(vectors, vectors[1:] + vectors[:1]):
        prod *= np.vdot(a, b)
    return float(-np.angle(prod))


def curl_check(params: ModelParams, scan: ad.SurfaceScan, label: int, rho: float, h: float = 1e-3) -> tuple[float, float]:
    """(B_z from the curvature sum, B_z from the Berry flux through an h x h plaquette) at (rho, 0, 0)."""
    corners = [(rho - h / 2, -h / 2), (rho + h / 2, -h / 2), (rho + h / 2, h / 2), (rho - h / 2, h / 2)]
    vecs = [ad.frame_at(Position.from_cartesian(x, y, 0.0), params, scan).vector(label) for x, y in corners]
    flux = plaquette_flux(vecs) / h**2
    return g.magnetic_field(label, Position(rho), params, scan)[2], flux


def _hermiticity(params, rng):
    worst = 0.0
    for pos in random_positions(20, rng):
        for op in (stark_hamiltonian(params), vdd_matrix(pos), hint(pos, params), jz_matrix(), *grad_hint(pos)):
            worst = max(worst, float(np.max(np.abs(op - op.conj().T))))
    return worst < 1e-12, f"max |H - H^+| = {worst:.2e}"


def _exchange(params, rng):
    P = exchange_operator()
    worst = max(float(np.max(np.abs(P @ vdd_matrix(p) @ P.T - vdd_matrix(p)))) for p in random_positions(20, rng))
    return worst < 1e-12, f"max deviation {worst:.2e}"


def _z_axis_blocks(params, rng):
    M = build_basis().M
    off = M[:, None] != M[None, :]
    zs = rng.uniform(0.5, 3.0, 20) * rng.choice([-1.0, 1.0], 20)
    worst = max(float(np.max(np.abs(vdd_matrix(Position(0.0, z))[off]))) for z in zs)
    return worst < 1e-12, f"max off-block element {worst:.2e}"


def _phi_invariance(params, rng):
    worst = 0.0
    for pos in random_positions(20, rng):
        e0 = np.linalg.eigvalsh(hint(pos.at_phi(0.0), params))
        e1 = np.linalg.eigvalsh(hint(pos, params))
        worst = max(worst, float(np.max(np.abs(e0 - e1))))
    return worst < 1e-10, f"max eigenvalue shift {worst:.2e}"


def _gradient(params, rng):
    h = 1e-6
    worst = 0.0
    for pos in random_positions(50, rng):
        x = pos.cartesian
        G = grad_hint(x)
        for k in range(3):
            dx = np.zeros(3)
            dx[k] = h
            fd = (hint(x + dx, params) - hint(x - dx, params)) / (2 * h)
            worst = max(worst, float(np.linalg.norm(fd - G[k]) / np.linalg.norm(G[k])))
    return worst < 1e-5, f"max relative error {worst:.2e}"


def _azimuthal_identity(params, rng):
    h = 1e-5
    worst = 0.0
    Jz = jz_matrix()
    for pos in random_positions(20, rng):
        fd = (hint(pos.at_phi(pos.phi + h), params) - hint(pos.at_phi(pos.phi - h), params)) / (2 * h)
        H = hint(pos, params)
        comm = -1j * (Jz @ H - H @ Jz)
        worst = max(worst, float(np.max(np.abs(fd - comm))))
    return worst < 1e-8, f"max |dH/dphi + i[Jz,H]| = {worst:.2e}"


def _hellmann_feynman(params, rng):
    h = 1e-6
    worst = 0.0
    for pos in random_positions(50, rng):
        frame = ad.eigensystem_at(pos, params)
        e_rho = np.array([np.cos(pos.phi), np.sin(pos.phi), 0.0])
        dH = np.einsum("k,kij->ij", e_rho, grad_hint(pos))
        hf = np.real(np.einsum("in,ij,jn->n", frame.vectors.conj(), dH, frame.vectors))
        up = np.linalg.eigvalsh(hint(Position(pos.rho + h, pos.z, pos.phi), params))
        dn = np.linalg.eigvalsh(hint(Position(pos.rho - h, pos.z, pos.phi), params))
        fd = (up - dn) / (2 * h)
        gaps = np.diff(frame.energies)
        ok = np.ones(N_STATES, bool)
        ok[:-1] &= gaps > 1e-4
        ok[1:] &= gaps > 1e-4
        rel = np.abs(fd - hf)[ok] / np.maximum(np.abs(hf[ok]), 1e-3)
        worst = max(worst, float(rel.max(initial=0.0)))
    return worst < 1e-5, f"max relative error {worst:.2e}"


def _closure(params, rng):
    worst = 0.0
    for pos in random_positions(20, rng):
        frame = g.local_frame(pos, params)
        for k, l in ((0, 1), (1, 2), (2, 0)):
            total = sum(frame.curvature([n], k, l)[0, 0] for n in range(N_STATES))
            worst = max(worst, abs(total))
    return worst < 1e-9, f"max |sum_n Omega_n| = {worst:.2e}"


def _rotation(params, rng):
    worst = 0.0
    for pos in random_positions(10, rng):
        frame = ad.rotate_state(ad.eigensystem_at(pos.at_phi(0.0), params), pos.phi)
        worst = max(worst, float(frame.residuals(params).max()))
    return worst < 1e-9, f"max residual {worst:.2e}"


def _parallel_transport(params, rng):
    scan, well = ad.prepare_radial_scan(params)
    rho = np.arange(well.rho_min - 0.02, well.rho_min + 0.02, 1e-3)
    z = np.arange(-0.02, 0.0205, 1e-3)
    plane = ad.track_surfaces(ad.plane_scan(params, rho, z), seed=(20, 20))
    plane = ad.fix_phases_parallel_transport(plane, (20, 20))
    imag = float(np.max(np.abs(np.imag(plane.vectors)))) if np.iscomplexobj(plane.vectors) else 0.0
    a_rho = float(np.max(np.abs(ad.discrete_connection(plane, 0))))
    a_z = float(np.max(np.abs(ad.discrete_connection(plane, 1))))
    ok = imag < 1e-10 and a_rho < 1e-6 and a_z < 1e-6
    return ok, f"A_rho {a_rho:.1e}, A_z {a_z:.1e}, Im {imag:.1e}"


def _curl(params, rng):
    scan, well = ad.prepare_radial_scan(params)
    worst = 0.0
    for rho in (0.9, 1.1, 1.6, 2.2):
        b, flux = curl_check(params, scan, well.surface_label, rho)
        worst = max(worst, abs(b - flux))
    return worst < 1e-4, f"max |B - plaquette flux| = {worst:.2e}"


def _commutator(params, rng):
    p = ModelParams(1.13, params.kappa)
    scan, well = ad.prepare_radial_scan(p)
    states = dy.identify_states(scan, well)
    worst_sym, worst_route, biggest = 0.0, 0.0, 0.0
    for rho in np.linspace(1.0, 2.0, 21):
        direct, diag = g.commutator_from_frame(g.local_frame(Position(rho), p, scan), (states.psi1, states.psi2))
        worst_sym = max(worst_sym, abs(direct[0, 0] + direct[1, 1]), abs(direct[0, 1] - direct[1, 0]))
        worst_route = max(worst_route, float(np.max(np.abs(np.diag(direct) - diag))))
        biggest = max(biggest, float(np.abs(direct).max()))
    ok = worst_sym < 1e-8 and worst_route < 1e-6 and biggest > 0
    return ok, f"symmetry {worst_sym:.1e}, routes {worst_route:.1e}, max|C| {biggest:.3g}"


def _gauge_sign_symmetry(params, rng):
    data = bs.well_data(params, n=bs.DEFAULT_POINTS)
    flat = data.without_gauge()
    worst = 0.0
    for m in (1, 2, 3):
        a = bs.vibrational_spectrum(bs.assemble_radial(m, flat, params.kappa)).levels
        b = bs.vibrational_spectrum(bs.assemble_radial(-m, flat, params.kappa)).levels
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst < 1e-12, f"max +-Mm splitting without A: {worst:.1e}"


def _norm(params, rng):
    p = ModelParams(1.13, params.kappa)
    scan, well = ad.prepare_radial_scan(p)
    state = dy.initial_state(1.5, dy.identify_states(scan, well).psi2, p, scan)
    f = dy._Forces(p)
    e0 = f.energy(state)
    for _ in range(2000):
        state = dy._step(state, dy.DEFAULT_DT, f)
    drift = abs(f.energy(state) - e0)
    return abs(state.norm - 1) < 1e-10 and drift < 1e-8, f"norm-1 {state.norm - 1:.1e}, energy drift {drift:.1e}"


CHECKS: list[tuple[str, Callable]] = [
    ("hermiticity", _hermiticity),
    ("exchange symmetry of V_dd", _exchange),
    ("M blocks on the z axis", _z_axis_blocks),
    ("phi invariance of the spectrum", _phi_invariance),
    ("analytic gradient vs finite differences", _gradient),
    ("azimuthal identity dH/dphi = -i[Jz,H]", _azimuthal_identity),
    ("Hellmann-Feynman", _hellmann_feynman),
    ("rotated eigenvectors", _rotation),
    ("curvature closure q=N", _closure),
    ("parallel-transport residuals", _parallel_transport),
    ("curvature sum vs plaquette curl", _curl),
    ("commutator symmetry and routes", _commutator),
    ("+-Mm degeneracy without gauge term", _gauge_sign_symmetry),
    ("norm and energy conservation", _norm),
]


def run_checks(params: ModelParams | None = None, names: list[str] | None = None) -> list[CheckResult]:
    params = params or ModelParams()
    rng = np.random.default_rng(SEED)
    results = []
    for name, fn in CHECKS:
        if names is not None and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            passed, detail = fn(params, rng)
        except Exception as exc:  # a crashing check is a failed check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - t0))
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}    {r.detail}")
    return "\n".join(lines)
