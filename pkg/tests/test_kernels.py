import os
import subprocess
import sys

import numpy as np
import pytest

from burgerslab import sde_kernels as K
from burgerslab._accel import USE_NUMBA
from burgerslab.rng import path_keys

CASES = [
    (K.STATIONARY, [1.0, 1e-2, 1.0], 1e-2, 0.0, [0.5, 1.0], 1e-3, 1e-2),
    (K.KHOKHLOV_BACKWARD, [1.0, 0.05, 1.0], 0.05, 0.2, [0.5], 1e-3, 5e-3),
    (K.KHOKHLOV_LOGTIME, [1.0, 1e-2, 1.0], 1e-2, 0.0, [1.0], 1e-3, 1e-2),
    (K.KHOKHLOV_FORWARD, [1.0, 0.2, 1.0], 0.2, 0.0, [0.25], 2e-3, 2e-3),
]


@pytest.mark.skipif(not USE_NUMBA, reason="numba backend not active")
@pytest.mark.parametrize("case", CASES, ids=["stationary", "kh_backward", "kh_logtime", "kh_forward"])
def test_backends_agree(case):
    model, p, kappa, x0, sig, fine, coarse = case
    keys = path_keys(5, np.arange(300))
    a = K.run_paths(model, p, kappa, x0, keys, sig, fine, coarse, backend="numpy")
    b = K.run_paths(model, p, kappa, x0, keys, sig, fine, coarse, backend="numba")
    assert np.max(np.abs(a[0] - b[0])) <= 1e-9


def test_numpy_backend_selected_by_env():
    code = "from burgerslab._accel import BACKEND; print(BACKEND)"
    env = dict(os.environ, BURGERSLAB_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
    env["BURGERSLAB_BACKEND"] = "fortran"
    bad = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert bad.returncode != 0


def test_jobs_split_is_invisible():
    keys = path_keys(9, np.arange(257))
    args = (K.KHOKHLOV_BACKWARD, [1.0, 0.05, 1.0], 0.05, 0.0, keys, [0.5], 1e-3, 5e-3)
    one = K.run_paths(*args, jobs=1)[0]
    three = K.run_paths(*args, jobs=3)[0]
    assert np.array_equal(one, three)
