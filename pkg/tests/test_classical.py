import io

import numpy as np
import pytest

from mimcavity import _kernels
from mimcavity.classical_sim import (
    MAX_SPEED,
    ClassicalState,
    PotentialSpec,
    SimOptions,
    adiabatic_invariant_probe,
    evolve_classical,
    field_energy,
    gaussian_packet,
    make_grid,
    mode_state,
    project_modes,
    radiation_force,
    read_snapshot,
    write_snapshot,
)
from mimcavity.errors import ConfigError, NumericalError
from mimcavity.spectral import CavityConfig, dispersion_roots, frequency_slope
from mimcavity.units import UnitSystem

NATURAL = UnitSystem(1.0, 1.0)
SHEET = CavityConfig(1.0, 0.01, 3.0, surrogate=True, units=NATURAL)
SLAB = CavityConfig(1.0, 0.05, 3.0, units=NATURAL)


def adiabatic_force(cfg, q, k, energy):
    s = dispersion_roots(cfg, q, indices=[k])
    return -energy * frequency_slope(s)[0] / s.omega[0]


def test_mode_projection_recovers_initial_energy():
    x = make_grid(SHEET, 800)
    st = mode_state(SHEET, x, 0.53, [1.0, 0.5], [6, 7], phases=[0.0, 1.0])
    e, spec = project_modes(SHEET, st, [6, 7])
    ref = 0.5 * spec.omega**2 * np.array([1.0, 0.25])
    np.testing.assert_allclose(e, ref, rtol=2e-3)
    assert field_energy(SHEET, st) == pytest.approx(e.sum(), rel=3e-3)


def test_frozen_energy_and_force():
    x = make_grid(SHEET, 500)
    q, k = 0.5301, 6
    st = mode_state(SHEET, x, q, [1.0], [k])
    tr = evolve_classical(SHEET, st, PotentialSpec(), 40.0, 0.5 * x[1],
                          SimOptions(motion="frozen", modes=(k,), sample_every=20))
    assert np.max(np.abs(tr.E_total / tr.E_total[0] - 1)) < 1e-4
    f_ad = adiabatic_force(SHEET, q, k, tr.E_total[0])
    assert tr.force.mean() == pytest.approx(f_ad, rel=0.03)


def test_slab_bracket_matches_lagrangian_force():
    x = make_grid(SLAB, 1000)
    st = mode_state(SLAB, x, 0.5301, [1.0], [6], phases=[0.4])
    b = radiation_force(st, SLAB, "bracket")
    lag = radiation_force(st, SLAB, "lagrangian")
    assert b == pytest.approx(lag, rel=5e-3)


def test_empty_cavity_has_no_force():
    cfg = CavityConfig(1.0, 0.05, 0.0, units=NATURAL)
    x = make_grid(cfg, 200)
    st = mode_state(cfg, x, 0.5, [1.0], [3])
    assert radiation_force(st, cfg) == 0.0
    tr = evolve_classical(cfg, st, PotentialSpec("free", mass=1.0), 2.0, 0.5 * x[1],
                          SimOptions(sample_every=40))
    assert np.all(tr.q == 0.5) and np.all(tr.force == 0.0)


@pytest.mark.skipif("compiled" not in _kernels.available_backends(), reason="no compiled core")
@pytest.mark.parametrize("cfg", [SHEET, SLAB], ids=["sheet", "slab"])
def test_dynamic_backends_agree(cfg):
    x = make_grid(cfg, 400)
    st = mode_state(cfg, x, 0.53, [1.0, 0.5], [6, 7], phases=[0, 1.0])
    pot = PotentialSpec("harmonic", mass=4e4, Omega=1.0, q_center=0.528)
    out = [evolve_classical(cfg, st, pot, 5.0, 0.5 * x[1], SimOptions(sample_every=50, backend=b)).final
           for b in ("python", "compiled")]
    np.testing.assert_allclose(out[0].A, out[1].A, atol=1e-11)
    assert abs(out[0].q - out[1].q) < 1e-13


@pytest.mark.parametrize("cfg", [SHEET, SLAB], ids=["sheet", "slab"])
def test_dynamic_energy_conservation(cfg):
    x = make_grid(cfg, 500)
    st = mode_state(cfg, x, 0.53, [1.0, 0.5], [6, 7], phases=[0, 1.0])
    pot = PotentialSpec("harmonic", mass=4e4, Omega=1.0, q_center=0.528)
    tr = evolve_classical(cfg, st, pot, 4 * np.pi, 0.5 * x[1], SimOptions(sample_every=100))
    assert np.max(np.abs(tr.E_total / tr.E_total[0] - 1)) < 2e-3
    assert np.ptp(tr.q) > 1e-4  # the membrane actually moved


def test_radiation_pressure_pushes_membrane():
    # free membrane starting at rest accelerates along the adiabatic force
    x = make_grid(SHEET, 500)
    st = mode_state(SHEET, x, 0.5301, [1.0], [6])
    tr = evolve_classical(SHEET, st, PotentialSpec("free", mass=1e5), 3.0, 0.5 * x[1],
                          SimOptions(sample_every=20))
    f = adiabatic_force(SHEET, 0.5301, 6, tr.E_total[0])
    assert np.sign(tr.q[-1] - tr.q[0]) == np.sign(f)


def test_adiabatic_invariant_probe():
    rep, tr = adiabatic_invariant_probe(SHEET, 6, 0.52, 0.54, 100.0, n_cells=500, sample_every=200)
    change = abs(tr.E_modes[-1, 0] / tr.E_modes[0, 0] - 1)
    assert rep.drift < 0.1 * change


def test_snapshot_round_trip():
    x = make_grid(SHEET, 64)
    st = mode_state(SHEET, x, 0.41, [1.0], [2])
    st = ClassicalState(st.x, st.A, st.V, st.q, 0.001, 1.5, -0.2)
    buf = io.BytesIO()
    write_snapshot(buf, st)
    buf.seek(0)
    back = read_snapshot(buf)
    assert np.array_equal(back.A, st.A) and np.array_equal(back.V, st.V)
    assert (back.q, back.qdot, back.t, back.qddot) == (st.q, st.qdot, st.t, st.qddot)
    with pytest.raises(ValueError):
        read_snapshot(io.BytesIO(b"X" * 48))


def test_csv_header_and_determinism():
    x = make_grid(SHEET, 200)
    st = mode_state(SHEET, x, 0.53, [1.0], [3])
    opts = SimOptions(motion="frozen", modes=(3, 4), sample_every=50)
    a = evolve_classical(SHEET, st, PotentialSpec(), 1.0, 0.5 * x[1], opts).to_csv()
    b = evolve_classical(SHEET, st, PotentialSpec(), 1.0, 0.5 * x[1], opts).to_csv()
    assert a == b
    assert a.splitlines()[0] == "t,q,qdot,E_total,E_mech,E_mode_3,E_mode_4"


def test_validation_errors():
    x = make_grid(SHEET, 100)
    st = mode_state(SHEET, x, 0.5, [1.0], [2])
    with pytest.raises(ConfigError):
        evolve_classical(SHEET, st, PotentialSpec(), 1.0, 2 * x[1])
    fast = ClassicalState(st.x, st.A, st.V, st.q, qdot=2 * MAX_SPEED)
    with pytest.raises(ConfigError):
        evolve_classical(SHEET, fast, PotentialSpec(), 1.0, 0.5 * x[1])
    with pytest.raises(ConfigError):
        evolve_classical(SLAB, mode_state(SLAB, make_grid(SLAB, 50), 0.5, [1.0], [2]),
                         PotentialSpec(), 1.0, 0.01)
    with pytest.raises(ConfigError):
        evolve_classical(SHEET, st, PotentialSpec(), 1.0, 0.5 * x[1],
                         SimOptions(motion="sine", motion_params=(0.5, 1.0, 1.0, 0.0)))
    with pytest.raises(ConfigError):
        PotentialSpec("harmonic", mass=1.0)


def test_runaway_membrane_is_reported():
    x = make_grid(SHEET, 200)
    st = mode_state(SHEET, x, 0.5301, [30.0], [6])
    with pytest.raises(NumericalError):
        evolve_classical(SHEET, st, PotentialSpec("free", mass=1e-2), 20.0, 0.5 * x[1],
                         SimOptions(sample_every=10))


def test_gaussian_packet_travels_at_light_speed():
    cfg = CavityConfig(1.0, 0.0, 0.0, units=NATURAL)
    x = make_grid(cfg, 2000)
    st = gaussian_packet(cfg, x, 0.5, 0.3, 0.02, 60.0)
    tr = evolve_classical(cfg, st, PotentialSpec(), 0.2, 0.5 * x[1],
                          SimOptions(motion="frozen", sample_every=400, snapshot_every=1))
    A = tr.final.A
    centre = np.sum(x * A**2) / np.sum(A**2)
    assert centre == pytest.approx(0.5, abs=5e-3)
