"""Numba and numpy kernel variants compute the same quantities."""

import os
import subprocess
import sys

import numpy as np
import pytest

from pfluidlab import _backend, _kernels


def _random_inputs(rng, dim=2, ne=7, nq=4, nb=6):
    D = rng.standard_normal((ne * nq, dim, dim))
    D = 0.5 * (D + np.swapaxes(D, 1, 2))
    gphi = rng.standard_normal((ne, nq, nb, dim))
    wdet = rng.uniform(0.1, 1.0, (ne, nq))
    phi = rng.standard_normal((nq, nb))
    wvals = rng.standard_normal((ne, nq, dim))
    vals = rng.standard_normal((ne, nq, dim))
    coeffs = rng.standard_normal(dim * (nb * 3))
    cells = rng.integers(0, nb * 3, (ne, nb)).astype(np.int64)
    return D, gphi, wdet, phi, wvals, vals, coeffs, cells


@pytest.mark.skipif(not _backend.USE_NUMBA, reason="numba backend not active")
class TestBackendAgreement:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_all_kernels_match(self, dim):
        rng = np.random.default_rng(42 + dim)
        nb = 6 if dim == 2 else 10
        D, gphi, wdet, phi, wvals, vals, coeffs, cells = _random_inputs(
            rng, dim=dim, nb=nb
        )
        args = {
            "stress_batch": (D, 1.7, 0.2, 1.3),
            "stress_tangent_batch": (D, 1.7, 0.0, 1.3, 1e-12),
            "scaled_strain_batch": (D, 1.7, 0.2),
            "grad_at_qp": (coeffs, cells, gphi, dim),
            "stress_residual_elem": (
                D.reshape(gphi.shape[0], gphi.shape[1], dim, dim), gphi, wdet,
            ),
            "convection_elem": (wvals, phi, gphi, wdet),
            "vector_load_elem": (vals, phi, wdet),
        }
        for name, a in args.items():
            got = _kernels.active_impls[name](*a)
            ref = _kernels.numpy_impls[name](*a)
            assert np.allclose(got, ref, rtol=1e-12, atol=1e-12), name
        T = _kernels.numpy_impls["stress_tangent_batch"](D, 1.7, 0.0, 1.3, 1e-12)
        Te = T.reshape(gphi.shape[0], gphi.shape[1], dim, dim, dim, dim)
        got = _kernels.active_impls["stress_tangent_elem"](Te, gphi, wdet)
        ref = _kernels.numpy_impls["stress_tangent_elem"](Te, gphi, wdet)
        assert np.allclose(got, ref, rtol=1e-12, atol=1e-12)

    def test_degenerate_rows_zero_on_both(self):
        D = np.zeros((3, 2, 2))
        for impl in (_kernels.numpy_impls, {"stress_batch": _kernels.stress_batch}):
            S = impl["stress_batch"](D, 1.5, 0.0, 1.0)
            assert np.array_equal(S, np.zeros_like(S))


class TestEnvFlag:
    def test_forced_numpy_backend(self):
        code = (
            "from pfluidlab import _backend, _kernels\n"
            "assert _backend.backend_name() == 'numpy'\n"
            "assert _kernels.stress_batch is _kernels.numpy_impls['stress_batch']\n"
            "print('ok')\n"
        )
        env = dict(os.environ, PFLUIDLAB_BACKEND="numpy")
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == "ok"

    def test_invalid_flag_rejected(self):
        code = "import pfluidlab"
        env = dict(os.environ, PFLUIDLAB_BACKEND="hexagonal")
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.returncode != 0
        assert "PFLUIDLAB_BACKEND" in out.stderr

    def test_numpy_backend_runs_a_step(self):
        code = (
            "import numpy as np\n"
            "from pfluidlab import PDeltaParams, TaylorHoodSpace, RunConfig, run, build_structured\n"
            "from pfluidlab.errors import taylor_green_2d, forcing_from_solution\n"
            "sol = taylor_green_2d()\n"
            "params = PDeltaParams(p=1.8, delta=0.0)\n"
            "space = TaylorHoodSpace(build_structured(2, 4))\n"
            "cfg = RunConfig(params=params, space=space, dt=0.1, n_steps=1,\n"
            "                forcing=forcing_from_solution(params, sol),\n"
            "                initial=sol.velocity_field(0.0))\n"
            "states, reports, energy = run(cfg)\n"
            "assert np.isfinite(energy.kinetic[-1])\n"
            "print(f'{energy.kinetic[-1]:.10f}')\n"
        )
        outs = []
        for backend in ("numpy", "auto"):
            env = dict(os.environ, PFLUIDLAB_BACKEND=backend)
            out = subprocess.run(
                [sys.executable, "-c", code], env=env, capture_output=True, text=True
            )
            assert out.returncode == 0, out.stderr
            outs.append(float(out.stdout.strip()))
        assert outs[0] == pytest.approx(outs[1], rel=1e-10)
