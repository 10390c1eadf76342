import subprocess
import sys

import numpy as np
import pytest

from driftmv import backend

HAVE_C = "c" in backend.available_backends()

GAMMA = 0.6
BMR = 0.15
R = 0.05
DELTA = 0.125


def _rand_dnu(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape) * np.sqrt(DELTA)


@pytest.mark.skipif(not HAVE_C, reason="compiled backend not built")
@pytest.mark.parametrize("shape", [(4, 7), (1, 1), (3, 0), (16, 5)])
@pytest.mark.parametrize("root", [0.4, 0.0, 1.0, -0.25, 1.3])
def test_backend_parity_branch_stats(shape, root):
    kc = backend.load_backend("c")
    kp = backend.load_backend("py")
    dnu = _rand_dnu(shape, seed=hash((shape, root)) % 2**32)
    out_c = kc.branch_stats(root, dnu, DELTA, BMR, GAMMA, R)
    out_p = kp.branch_stats(root, dnu, DELTA, BMR, GAMMA, R)
    for a, b in zip(out_c, out_p):
        assert np.array_equal(np.asarray(a), np.asarray(b))


@pytest.mark.skipif(not HAVE_C, reason="compiled backend not built")
@pytest.mark.parametrize("w_root", [0.0, -0.7, 1.9])
def test_backend_parity_example_stats(w_root):
    kc = backend.load_backend("c")
    kp = backend.load_backend("py")
    dw = _rand_dnu((9, 11), seed=77)
    lc, bc = kc.example_branch_stats(w_root, dw, DELTA)
    lp, bp = kp.example_branch_stats(w_root, dw, DELTA)
    assert np.array_equal(np.asarray(lc), np.asarray(lp))
    assert np.array_equal(np.asarray(bc), np.asarray(bp))


@pytest.mark.parametrize("name", backend.available_backends())
def test_kernels_reject_bad_layout(name):
    k = backend.load_backend(name)
    good = np.zeros((3, 4))
    f_order = np.asfortranarray(np.zeros((3, 4)))
    f32 = np.zeros((3, 4), dtype=np.float32)
    # a valid array passes
    k.branch_stats(0.5, good, DELTA, BMR, GAMMA, R)
    with pytest.raises(ValueError):
        k.branch_stats(0.5, f_order, DELTA, BMR, GAMMA, R)
    with pytest.raises(ValueError):
        k.branch_stats(0.5, f32, DELTA, BMR, GAMMA, R)
    with pytest.raises(ValueError):
        k.example_branch_stats(0.0, f32, DELTA)


def test_zero_steps_yield_zero_stats():
    dnu = np.zeros((5, 0))
    lr, s2, s3 = backend.branch_stats(0.3, dnu, DELTA, BMR, GAMMA, R)
    assert np.all(np.asarray(lr) == 0.0)
    assert np.all(np.asarray(s2) == 0.0)
    assert np.all(np.asarray(s3) == 0.0)
    logr, bracket = backend.example_branch_stats(0.4, dnu, DELTA)
    assert np.all(np.asarray(logr) == 0.0)
    # empty branch: bracket collapses to 2*w_root + 2
    assert np.all(np.asarray(bracket) == 2.0 * 0.4 + 2.0)


def test_single_step_hand_formulas():
    pi_root = 0.37
    dnu = np.array([[0.21], [-0.43], [0.055]])
    lr, s2, s3 = backend.branch_stats(pi_root, dnu, DELTA, BMR, GAMMA, R)
    dn = dnu[:, 0]
    th = BMR + GAMMA * pi_root
    d0 = GAMMA * pi_root * (1.0 - pi_root)
    assert np.array_equal(np.asarray(lr), -(th * dn + DELTA * (R + 0.5 * (th * th))))
    assert np.array_equal(np.asarray(s2), d0 * dn)
    assert np.array_equal(np.asarray(s3), np.zeros(3) + DELTA * (th * d0))


def test_single_step_example_hand_formulas():
    w_root = 0.6
    dw = np.array([[0.3], [-0.2]])
    logr, bracket = backend.example_branch_stats(w_root, dw, DELTA)
    d = dw[:, 0]
    ow = 1.0 + w_root
    assert np.array_equal(np.asarray(logr),
                          2.0 * (ow * d) - 2.0 * DELTA * (ow * ow))
    assert np.array_equal(np.asarray(bracket),
                          2.0 * (w_root + d) - 4.0 * (DELTA * ow) + 2.0)


@pytest.mark.parametrize("root", [0.0, 1.0, -0.25, 1.3])
def test_tangent_vanishes_outside_open_interval(root):
    # diffusion and its derivative seed are truncated to zero at/outside {0,1}
    dnu = _rand_dnu((6, 9), seed=123)
    _, s2, s3 = backend.branch_stats(root, dnu, DELTA, BMR, GAMMA, R)
    assert np.all(np.asarray(s2) == 0.0)
    assert np.all(np.asarray(s3) == 0.0)


def test_load_backend_names():
    with pytest.raises(ValueError):
        backend.load_backend("fortran")
    assert backend.load_backend("py").branch_stats is not None
    assert backend.BACKEND in backend.available_backends()


def _import_with_env(value):
    code = "import driftmv.backend as b; print(b.BACKEND)"
    env = {"PATH": "/usr/bin:/bin", "DRIFTMV_BACKEND": value}
    return subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True)


def test_backend_env_selection():
    res = _import_with_env("py")
    assert res.returncode == 0, res.stderr
    assert res.stdout.strip() == "py"
    bad = _import_with_env("bogus")
    assert bad.returncode != 0
    assert "DRIFTMV_BACKEND" in bad.stderr
    if HAVE_C:
        res_c = _import_with_env("c")
        assert res_c.returncode == 0, res_c.stderr
        assert res_c.stdout.strip() == "c"
