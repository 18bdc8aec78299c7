import numpy as np
import pytest

from rydgauge import adiabatic as ad
from rydgauge import gauge as g
from rydgauge import verify as vf
from rydgauge.errors import ConsistencyError, DegeneracyError, SingularityError
from rydgauge.model import N_STATES, ModelParams, Position


def test_connection_hermitian(params):
    frame = g.local_frame(Position(1.1, 0.3, 0.4), params)
    labels = [5, 6, 7, 8]
    A = frame.connection(labels)
    for k in range(3):
        assert np.allclose(A[k], A[k].conj().T, atol=1e-12)


def test_offdiag_matches_finite_difference(params, radial3):
    # A_nm = i<n|d m>, compared with a central difference of phase-fixed vectors
    scan, _ = radial3
    h = 1e-5
    rho = 1.2
    frame = g.local_frame(Position(rho), params, scan)
    up = ad.frame_at(Position(rho + h), params, scan).labelled()[1]
    dn = ad.frame_at(Position(rho - h), params, scan).labelled()[1]
    fd = 1j * frame.vectors.conj().T @ (up - dn) / (2 * h)
    A = frame.offdiag(range(N_STATES), range(N_STATES))[0]
    gaps = np.abs(frame.energies[:, None] - frame.energies[None, :])
    ok = gaps > 1e-3
    assert np.abs(A - fd)[ok].max() < 1e-5


def test_azimuthal_connection_phi_independent(params, radial3):
    scan, well = radial3
    a0 = g.connection_diag_phi(well.surface_label, Position(1.0, 0.2), params, scan)
    a1 = g.connection_diag_phi(well.surface_label, Position(1.0, 0.2, 2.2), params, scan)
    assert abs(a0 - a1) < 1e-10


def test_azimuthal_connection_singular_on_axis(params):
    with pytest.raises(SingularityError):
        g.connection_diag_phi(0, Position(0.0, 1.0), params)


def test_symmetric_case_has_no_azimuthal_connection():
    p = ModelParams(1.0, 2.8e-6)
    scan = ad.track_surfaces(ad.radial_scan(p, (0.7, 6.0), 2000))
    well = ad.find_well_state(scan, asymptote=None)
    for rho in np.linspace(0.8, 3.0, 12):
        assert abs(g.connection_diag_phi(well.surface_label, Position(rho), p, scan)) < 1e-8


def test_degenerate_states_rejected(params):
    frame = g.local_frame(Position(100.0), params)
    n = int(np.argmin(np.diff(frame.energies)))
    with pytest.raises(DegeneracyError) as info:
        frame.offdiag([n], [n + 1])
    assert info.value.gap < g.GAP_TOL


def test_closure_full_space(params):
    for pos in vf.random_positions(5, np.random.default_rng(2)):
        frame = g.local_frame(pos, params)
        for k, l in ((0, 1), (1, 2), (2, 0)):
            assert abs(sum(frame.curvature([n], k, l)[0, 0] for n in range(N_STATES))) < 1e-9
        assert not frame.curvature(range(N_STATES), 0, 1).any()


def test_curvature_antisymmetric(params):
    frame = g.local_frame(Position(1.3, 0.2, 0.5), params)
    F01 = frame.curvature([7, 8], 0, 1)
    assert np.allclose(F01, -frame.curvature([7, 8], 1, 0))
    assert np.allclose(F01, F01.conj().T)


def test_gauge_covariance(params113, radial113, states113):
    scan, _ = radial113
    pair = [states113.psi1, states113.psi2]
    pos = Position(1.3)
    frame = g.local_frame(pos, params113, scan)
    theta = np.random.default_rng(11).uniform(0, 2 * np.pi, N_STATES)
    twisted = g.LocalFrame.from_vectors(pos, frame.energies, frame.vectors * np.exp(1j * theta))
    for k, l in ((0, 1), (1, 2), (0, 2)):
        a = np.linalg.eigvalsh(frame.curvature(pair, k, l))
        b = np.linalg.eigvalsh(twisted.curvature(pair, k, l))
        assert np.allclose(a, b, atol=1e-10)
    c1, d1 = g.commutator_from_frame(frame, pair)
    c2, d2 = g.commutator_from_frame(twisted, pair)
    assert np.allclose(np.linalg.eigvalsh(c1), np.linalg.eigvalsh(c2), atol=1e-10)
    assert np.trace(c1) == pytest.approx(np.trace(c2), abs=1e-10)
    assert np.allclose(d1, d2, atol=1e-10)


def test_field_in_plane(params, radial3):
    scan, well = radial3
    for rho in (0.85, 1.0, 1.5, 2.5):
        B = g.magnetic_field(well.surface_label, Position(rho, 0.0, 0.6), params, scan)
        assert abs(B[0]) < 1e-8 and abs(B[1]) < 1e-8
    B = g.magnetic_field(well.surface_label, Position(well.rho_min), params, scan)
    assert B[2] < 0


def test_no_azimuthal_field_component(params):
    for pos in (Position(1.2, 0.3, 0.0), Position(0.9, -0.5, 1.0), Position(2.0, 0.8, -2.0)):
        frame = g.local_frame(pos, params)
        for n in range(N_STATES):
            try:
                B = np.real(g.curvature_vector(frame, [n])[:, 0, 0])
            except DegeneracyError:
                continue
            assert abs(g.to_cylindrical(B, pos.phi)[1]) < 1e-8


def test_field_matches_curl_of_connection(params, radial3):
    scan, well = radial3
    for rho, z in ((1.1, 0.0), (1.5, 0.2)):
        B = g.to_cylindrical(g.magnetic_field(well.surface_label, Position(rho, z), params, scan), 0.0)
        curl = g.magnetic_field_curl(well.surface_label, rho, z, params, scan)
        assert np.allclose(B, curl, atol=1e-6)


def test_field_matches_plaquette_flux(params, radial3):
    scan, well = radial3
    for rho in (0.9, 1.6):
        b, flux = vf.curl_check(params, scan, well.surface_label, rho)
        assert abs(b - flux) < 1e-4


def test_cylindrical_roundtrip():
    v = np.array([0.3, -1.2, 0.7])
    assert np.allclose(g.from_cylindrical(g.to_cylindrical(v, 0.9), 0.9), v)


def test_nonabelian_block_structure(params113, radial113, states113):
    scan, _ = radial113
    pair = [states113.psi1, states113.psi2]
    rhos = np.linspace(1.0, 2.0, 101)
    a12 = []
    for rho in rhos:
        A = g.connection_block(pair, Position(rho), params113, scan)
        assert abs(A[0, 0, 1].real) < 1e-12
        assert abs(A[1, 0, 1].imag) < 1e-12
        a12.append(abs(A[0, 0, 1]))
    assert abs(rhos[int(np.argmax(a12))] - 1.33) < 0.03


def test_commutator(params113, radial113, states113):
    scan, _ = radial113
    pair = [states113.psi1, states113.psi2]
    biggest = 0.0
    for rho in np.linspace(1.0, 2.0, 11):
        C = g.commutator_C(Position(rho), params113, scan, pair)
        assert abs(C[0, 0] + C[1, 1]) < 1e-8
        assert abs(C[0, 1] - C[1, 0]) < 1e-8
        biggest = max(biggest, np.abs(C).max())
    assert biggest > 0.1


def test_commutator_consistency_guard(params113, radial113, states113, monkeypatch):
    scan, _ = radial113
    monkeypatch.setattr(g, "CONSISTENCY_TOL", -1.0)
    with pytest.raises(ConsistencyError):
        g.commutator_C(Position(1.3), params113, scan, [states113.psi1, states113.psi2])


def test_scalar_potential_small(params, radial3):
    scan, well = radial3
    phi = g.scalar_potential([well.surface_label], Position(well.rho_min), params, scan)
    assert phi[0, 0].real >= 0
    assert abs(phi[0, 0]) / well.depth < 1e-2
    assert not g.scalar_potential(range(N_STATES), Position(1.0), params).any()


def test_gauge_rows_sorted():
    rows = list(g.gauge_rows(3.0, Position(1.0), {"b": 1 + 2j, "a": 3.0}))
    assert [r[4] for r in rows] == ["a", "b"]
    assert rows[1][5:] == (1.0, 2.0)
