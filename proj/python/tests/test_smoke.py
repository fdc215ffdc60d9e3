import math
import pathlib

import numpy as np
import pytest

import gmsurf

DATA = pathlib.Path(__file__).resolve().parents[2] / "tests" / "data"


def test_sphere_mesh_is_closed_and_accurate():
    v, t, report = gmsurf.mesh(np.zeros((1, 3)), np.array([2.0]), tau=1e-3, workers=1)
    assert v.shape[1] == 3 and t.shape[1] == 3
    assert report["defects"] == 0
    assert report["euler_characteristic"] == 2
    assert abs(report["area"] / (16 * math.pi) - 1) < 0.02
    assert abs(report["volume"] / (32 / 3 * math.pi) - 1) < 0.02
    assert np.allclose(np.linalg.norm(v, axis=1), 2.0, atol=0.05)


def test_pqr_and_check_round_trip():
    centers, radii = gmsurf.read_pqr(str(DATA / "cluster7.pqr"))
    assert centers.shape == (7, 3) and radii.shape == (7,)
    v, t, report = gmsurf.mesh(centers, radii, workers=1)
    again = gmsurf.check(v, t)
    assert again["defects"] == 0
    assert again["triangles"] == report["triangles"]
    v2, t2 = gmsurf.read_off(gmsurf.write_off(v, t))
    assert np.array_equal(t2, t)
    assert np.allclose(v2, v, rtol=1e-8)


def test_oracle_agrees_with_mesh():
    centers = np.array([[-0.9, 0.1, 0.0], [1.0, -0.2, 0.3]])
    radii = np.array([1.6, 1.3])
    _, _, report = gmsurf.mesh(centers, radii, tau=1e-3, workers=1)
    ov, ot = gmsurf.oracle(centers, radii, spacing=0.1)
    ref = gmsurf.check(ov, ot)
    assert ref["defects"] == 0
    assert abs(report["area"] / ref["area"] - 1) < 0.03


def test_errors_are_python_exceptions():
    with pytest.raises(gmsurf.ParseError):
        gmsurf.read_off("OFF\n3 1\n")
    with pytest.raises(gmsurf.Error):
        gmsurf.mesh(np.zeros((1, 3)), np.array([1.0]), tau=-1.0)
    with pytest.raises(gmsurf.Error):
        gmsurf.mesh(np.zeros((1, 3)), np.array([-1.0]))
