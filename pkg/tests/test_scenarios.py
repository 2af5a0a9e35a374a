import json
import math

import numpy as np
import pytest

from arrayg2 import Scenario, ValidationError, build_scenario, chiral_chain, single_atom, square_array


def test_square_geometry():
    sc = square_array(a=0.1, theta=0.25 * math.pi)
    pos = sc.array.positions
    d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
    assert np.allclose(sorted(d[0])[1:3], 0.1)
    assert np.allclose(pos.mean(axis=0), 0)
    np.testing.assert_allclose(sc.array.dipole_orientations[0].real, [math.sqrt(0.5)] * 2 + [0])
    np.testing.assert_array_equal(sc.setup.incident_mode.direction, [0, 0, 1])
    np.testing.assert_array_equal(sc.setup.detected_mode.direction, [0, 0, -1])
    assert sc.detuning == 3.9 and sc.n_atoms == 4


def test_square_rotation_symmetry():
    e0 = np.sort_complex(square_array(theta=0.0).spectrum.eigenvalues)
    e90 = np.sort_complex(square_array(theta=0.5 * math.pi).spectrum.eigenvalues)
    np.testing.assert_allclose(e0, e90, atol=1e-12)
    # theta and pi - theta are mirror images as well
    g_a = square_array(theta=0.3).trace([0.0, 1.0, 5.0]).g2
    g_b = square_array(theta=math.pi - 0.3).trace([0.0, 1.0, 5.0]).g2
    np.testing.assert_allclose(g_a, g_b, rtol=1e-10)


def test_chain_rates():
    sc = chiral_chain(n_atoms=5, a=0.22, xi=0.01, gamma_r=0.1)
    p = sc.array
    assert p.gamma_wg == pytest.approx(1.0)
    assert p.xi == pytest.approx(0.01)
    np.testing.assert_allclose(p.z_positions, 0.22 * np.arange(5))
    assert chiral_chain(xi=1.0).hamiltonian.is_symmetric()
    assert not sc.hamiltonian.is_symmetric()


@pytest.mark.parametrize(
    "kind,bad",
    [("square", {"a": 0.0}), ("square", {"theta": math.pi}), ("chain", {"xi": 1.5}),
     ("chain", {"n_atoms": 2.5}), ("chain", {"gamma_r": -0.1}), ("single_atom", {"detuning": 101.0}),
     ("square", {"radius": 1.0})],
)
def test_parameter_validation(kind, bad):
    with pytest.raises(ValidationError):
        build_scenario(kind, **bad)


def test_unknown_kind():
    with pytest.raises(ValidationError):
        build_scenario("ring")


def test_round_trip_bit_identical():
    for sc in (square_array(a=0.13, theta=0.4, detuning=-2.0), chiral_chain(n_atoms=4, xi=0.3), single_atom(1.5)):
        text = json.dumps(sc.to_dict())
        back = Scenario.from_dict(json.loads(text))
        assert back.params == sc.params
        np.testing.assert_array_equal(back.hamiltonian.matrix, sc.hamiltonian.matrix)
        np.testing.assert_array_equal(back.g_in, sc.g_in)
        np.testing.assert_array_equal(back.g_out, sc.g_out)
        np.testing.assert_array_equal(back.c_constants(), sc.c_constants())


def test_from_dict_rejects():
    with pytest.raises(ValidationError):
        Scenario.from_dict({"kind": "square", "extra": 1})
    with pytest.raises(ValidationError):
        Scenario.from_dict({"schema_version": 2, "kind": "square"})
    with pytest.raises(ValidationError):
        Scenario.from_dict({"params": {}})


def test_with_params():
    sc = square_array()
    moved = sc.with_params(detuning=1.0)
    assert moved.detuning == 1.0 and moved.params["a"] == sc.params["a"]
    assert sc.detuning == 3.9
