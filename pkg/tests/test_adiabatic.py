import numpy as np
import pytest

from rydgauge import adiabatic as ad
from rydgauge.errors import AmbiguityError, DetectionError
from rydgauge.model import ModelParams, Position, build_basis, hint


def test_eigensystem_phi_invariant(params):
    a = ad.eigensystem_at(Position(1.2, 0.3, 0.0), params)
    b = ad.eigensystem_at(Position(1.2, 0.3, 1.234), params)
    assert np.abs(a.energies - b.energies).max() < 1e-10
    assert np.isrealobj(a.vectors)
    assert np.all(np.diff(a.energies) >= 0)
    assert a.residuals(params).max() < 1e-12
    assert b.residuals(params).max() < 1e-12


def test_rotation_full_turn(params):
    frame = ad.eigensystem_at(Position(0.9, 0.2), params)
    turned = ad.rotate_state(frame, 2 * np.pi)
    assert np.allclose(turned.vectors, frame.vectors, atol=1e-13)


@pytest.mark.parametrize("phi", [0.3, -2.1, np.pi])
def test_rotated_vectors_are_eigenvectors(params, phi):
    frame = ad.rotate_state(ad.eigensystem_at(Position(1.4, -0.5), params), phi)
    assert frame.position.phi == phi
    assert frame.residuals(params).max() < 1e-9


def test_rotate_requires_phi_zero(params):
    with pytest.raises(ValueError):
        ad.rotate_state(ad.eigensystem_at(Position(1.0, 0.0, 0.5), params), 0.1)


def test_frame_labelling_roundtrip(params):
    e = np.arange(16.0)[::-1]
    v = np.eye(16)
    frame = ad.AdiabaticFrame.from_labelled(Position(1.0), e, v)
    assert np.all(np.diff(frame.energies) >= 0)
    e2, v2 = frame.labelled()
    assert np.array_equal(e2, e) and np.array_equal(v2, v)
    assert frame.energy(3) == 12.0


def test_tracking_refinement(params):
    coarse = ad.track_surfaces(ad.radial_scan(params, (0.7, 6.0), 1000))
    fine = ad.track_surfaces(ad.radial_scan(params, (0.7, 6.0), 1999))
    assert np.allclose(fine.energies[::2], coarse.energies, atol=1e-12)


def test_tracking_keeps_identity_through_crossing(radial113, states113):
    scan, _ = radial113
    assert 0.9 < states113.rho_crossing < 1.2
    d = scan.surface(states113.psi2) - scan.surface(states113.psi3)
    before = scan.rho < states113.rho_crossing - 0.02
    after = (scan.rho > states113.rho_crossing + 0.02) & (scan.rho < 1.3)
    assert np.ptp(np.sign(d[before])) == 0 and np.ptp(np.sign(d[after])) == 0
    assert np.sign(d[before][0]) != np.sign(d[after][0])
    # energy ranks swap at a true crossing while labels persist
    ranks = scan.ranks()
    assert ranks[before][0, states113.psi2] != ranks[after][0, states113.psi2]


def test_match_columns_ambiguous():
    ref = np.eye(16)
    cand = np.eye(16)
    s = 1 / np.sqrt(2)
    cand[:2, :2] = [[s, s], [s, -s]]
    with pytest.raises(AmbiguityError):
        ad.match_columns(ref, cand, where="test")


def test_match_columns_permutation():
    perm = np.random.default_rng(3).permutation(16)
    cand = np.eye(16)[:, perm]
    got = ad.match_columns(np.eye(16), cand)
    assert np.array_equal(cand[:, got], np.eye(16))


def test_phase_fixing_requires_tracking(params):
    with pytest.raises(ValueError):
        ad.fix_phases_parallel_transport(ad.radial_scan(params, (0.7, 6.0), 50), 0)


def test_phase_fixed_radial_scan(radial3):
    scan, well = radial3
    assert scan.phase_fixed and np.isrealobj(scan.vectors)
    # parallel transport: smooth real vectors have no diagonal connection
    assert np.abs(ad.discrete_connection(scan)).max() < 1e-6
    overlaps = np.einsum("nik,nik->nk", scan.vectors[:-1], scan.vectors[1:])
    assert overlaps.min() > 0


def test_phase_fixed_plane(params, radial3):
    _, well = radial3
    rho = np.arange(well.rho_min - 0.01, well.rho_min + 0.0105, 1e-3)
    z = np.arange(-0.01, 0.0105, 1e-3)
    plane = ad.track_surfaces(ad.plane_scan(params, rho, z), seed=(10, 10))
    plane = ad.fix_phases_parallel_transport(plane, (10, 10))
    assert np.abs(np.imag(plane.vectors)).max() < 1e-10
    assert np.abs(ad.discrete_connection(plane, 0)).max() < 1e-6
    assert np.abs(ad.discrete_connection(plane, 1)).max() < 1e-6


def test_well_delta3(params, radial3):
    scan, well = radial3
    assert 0.8 <= well.rho_min <= 1.3
    assert well.asymptote == -1.0
    assert well.energy_min == pytest.approx(-1.8972, abs=1e-3)
    assert well.depth > 0
    far = ad.far_field_energy(params, scan, well.surface_label, R=50.0)
    assert abs(far + 1.0) < 1e-3


def test_depth_ordering(params):
    _, w3 = ad.prepare_radial_scan(params)
    _, w13 = ad.prepare_radial_scan(params.replace(delta_ratio=1.3))
    assert w3.depth > w13.depth
    # the shallower well is held by the barrier of its avoided crossing
    assert w13.barrier - w13.energy_min > 0


def test_symmetric_case_needs_widened_detection():
    p = ModelParams(1.0, 2.8e-6)
    scan = ad.track_surfaces(ad.radial_scan(p, (0.7, 6.0), 2000))
    with pytest.raises(DetectionError):
        ad.find_well_state(scan)
    well = ad.find_well_state(scan, asymptote=None)
    assert 0.7 < well.rho_min < 2.0


def test_find_well_requires_coverage(params):
    scan = ad.track_surfaces(ad.radial_scan(params, (0.7, 3.0), 200))
    with pytest.raises(ValueError):
        ad.find_well_state(scan)


def test_frame_at_matches_scan_nodes(params, radial3):
    scan, well = radial3
    i = scan.nearest_index(well.rho_min)
    frame = ad.frame_at(Position(float(scan.rho[i])), params, scan)
    e, v = frame.labelled()
    assert np.allclose(e, scan.energies[i], atol=1e-12)
    assert np.allclose(v, scan.vectors[i], atol=1e-10)


def test_frame_at_rotated(params, radial3):
    scan, well = radial3
    pos = Position(1.234, 0.0, 0.8)
    frame = ad.frame_at(pos, params, scan)
    assert frame.residuals(params).max() < 1e-9
    jz = np.real(np.einsum("ik,i,ik->k", frame.vectors.conj(), build_basis().M, frame.vectors))
    base = ad.frame_at(pos.at_phi(0.0), params, scan)
    jz0 = np.real(np.einsum("ik,i,ik->k", base.vectors, build_basis().M, base.vectors))
    assert np.allclose(jz, jz0)


def test_xy_map_rotational_symmetry(params, radial3):
    scan, well = radial3
    m = ad.potential_map("xy", (-1.5, 1.5, -1.5, 1.5), params, 41, scan, well)
    E = m.energy
    assert np.nanmax(np.abs(E - E.T)) < 1e-10
    assert np.nanmax(np.abs(E - E[:, ::-1])) < 1e-10
    assert np.nanmax(np.abs(E - E[::-1, :])) < 1e-10
    assert np.isnan(E[20, 20])


def test_xz_map_two_minima(params, radial3):
    scan, well = radial3
    m = ad.potential_map("xz", (-1.5, 1.5, -1.5, 1.5), params, 61, scan, well)
    E = np.where(np.isnan(m.energy), np.inf, m.energy)
    left, right = E[:, :30], E[:, 31:]
    il = np.unravel_index(np.argmin(left), left.shape)
    ir = np.unravel_index(np.argmin(right), right.shape)
    assert m.axis0[il[1]] < -0.7 and m.axis0[31 + ir[1]] > 0.7
    assert abs(m.axis1[il[0]]) < 0.1 and abs(m.axis1[ir[0]]) < 0.1
    assert left.min() == pytest.approx(right.min(), abs=1e-9)


def test_map_rejects_bad_plane(params, radial3):
    scan, well = radial3
    with pytest.raises(ValueError):
        ad.potential_map("yz", (-1, 1, -1, 1), params, 5, scan, well)


def test_scan_rows(radial3):
    scan, well = radial3
    rows = list(ad.scan_rows(scan, [well.surface_label]))
    assert len(rows) == scan.shape[0]
    assert rows[0][3] == well.surface_label


def test_scan_hamiltonian_consistency(params, radial3):
    scan, _ = radial3
    for i in (0, 1234, len(scan.rho) - 1):
        H = hint(Position(float(scan.rho[i])), params).real
        v = scan.vectors[i]
        assert np.abs(H @ v - v * scan.energies[i]).max() < 1e-12
