import math

import numpy as np
import pytest

import isojet


def test_metric_and_frame():
    g = isojet.metric("poincare_disc")
    assert g.dim == 2
    assert np.allclose(g.value([0.0, 0.0]), 4 * np.eye(2))
    p, b = isojet.orthonormal_frame(g, [0.3, 0.1])
    assert np.allclose(b.T @ g.value(p) @ b, np.eye(2), atol=1e-12)


def test_unknown_metric_raises():
    with pytest.raises(ValueError):
        isojet.metric("klein")


def test_sphere_curvature_pattern():
    g = isojet.metric("sphere_patch", {"radius": [1.0]})
    p, b = isojet.orthonormal_frame(g, [0.2, -0.1])
    s = isojet.s_invariant(g, p, b, 2)
    assert np.allclose(s[(0, 0)], np.eye(2), atol=1e-8)
    assert np.allclose(s[(1, 0)], 0.0, atol=1e-8)
    # -(1/3)(delta_ij |x|^2 - x_i x_j)
    assert np.allclose(s[(2, 0)], [[0.0, 0.0], [0.0, -1 / 3]], atol=1e-5)
    assert np.allclose(s[(1, 1)], [[0.0, 1 / 3], [1 / 3, 0.0]], atol=1e-5)


def test_exp_log_roundtrip():
    g = isojet.metric("poincare_disc")
    q = isojet.exp_map(g, [0.1, 0.0], [0.2, 0.1])
    assert np.allclose(isojet.log_map(g, [0.1, 0.0], q), [0.2, 0.1], atol=1e-8)


def test_flat_is_not_sphere():
    flat = isojet.metric("euclidean")
    sphere = isojet.metric("sphere_patch")
    pts = [[0.0, 0.0], [0.2, 0.1]]
    a = [isojet.orthonormal_frame(flat, p) for p in pts]
    b = [isojet.orthonormal_frame(sphere, p) for p in pts]
    match, reason = isojet.check_isometry(flat, sphere, a, b)
    assert not match
    assert reason


def test_disc_kernel_partial_sum():
    z, w = complex(0.3, -0.2), complex(-0.1, 0.4)
    exact = sum((k + 1) / math.pi * (z * w.conjugate()) ** k for k in range(21))
    k = isojet.bergman_kernel("disc", {}, 20, [z.real, z.imag], [w.real, w.imag])
    assert abs(k - exact) / abs(exact) < 1e-8


def test_flip_profile():
    assert isojet.flip_profile(0.0) == 0.0
    assert isojet.flip_profile(-0.5, 1.0) == pytest.approx(math.exp(-2.0))


def test_run_scenarios():
    yaml = """
scenarios:
  - id: flat
    command: invariants
    seed: 5
    metric: {id: euclidean}
    random_frames: 2
    expect: {normal_coordinates: 1.0e-10}
"""
    (r,) = isojet.run_scenarios(yaml)
    assert r["schema"] == isojet.report_schema
    assert r["status"] == "pass"
    assert r == isojet.run_scenarios(yaml)[0]
    with pytest.raises(ValueError, match="<string>:"):
        isojet.run_scenarios("scenarios: [{id: a, command: nope}]")
