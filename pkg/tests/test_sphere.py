import numpy as np
import pytest

from qvista.sphere import (
    SpherePoint,
    complex_from_sphere,
    sphere_from_complex,
    spherical_dist_matrix,
    spherical_distance,
)


def length_element_integral(z0: complex, z1: complex, steps: int = 200_000) -> float:
    """Quadrature of 2|dz|/(1+|z|^2) along the straight segment."""
    t = (np.arange(steps) + 0.5) / steps
    z = z0 + t * (z1 - z0)
    return float(np.sum(2.0 * abs(z1 - z0) / steps / (1.0 + np.abs(z) ** 2)))


def test_same_point_zero():
    p = SpherePoint.from_complex(0.3 + 0.4j)
    assert spherical_distance(p, p) == 0.0


def test_antipodal():
    p = SpherePoint.from_complex(0)
    q = SpherePoint.from_complex(None)  # the point at infinity
    assert spherical_distance(p, q) == pytest.approx(np.pi)


def test_zero_to_one_quarter_circle():
    p = SpherePoint.from_complex(0)
    q = SpherePoint.from_complex(1)
    d = spherical_distance(p, q)
    assert d == pytest.approx(2 * np.arctan(1.0), abs=1e-12)
    # straight chart segment [0,1] happens to be a geodesic here
    assert d == pytest.approx(length_element_integral(0, 1), abs=1e-9)


def test_chart_round_trip():
    for z in (0, 1, -2 + 3j, 0.001j, 57.0):
        v = sphere_from_complex(z)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        back = complex_from_sphere(v)
        assert back == pytest.approx(complex(z), abs=1e-9)
    assert complex_from_sphere(sphere_from_complex(None)) is None


def test_metric_axioms_random_sample():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(100, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    d = spherical_dist_matrix(v)
    assert np.allclose(d, d.T)
    assert np.all(np.diag(d) == 0)
    assert np.all(d[~np.eye(100, dtype=bool)] > 0)
    assert np.all(d <= np.pi + 1e-12)
    for k in range(100):
        assert np.all(d <= d[:, k][:, None] + d[k, :][None, :] + 1e-12)


def test_unit_norm_enforced():
    with pytest.raises(ValueError):
        SpherePoint(np.array([1.0, 1.0, 0.0]))
