"""Hot elementwise kernels for the pseudospectral right-hand side.

Every kernel exists twice: a numba ``@njit`` loop and a plain numpy
broadcast version with identical semantics.  The active set is chosen once
at import from ``HALLMHD_KERNELS`` (``numba`` or ``numpy``); numba is used
when available and not vetoed.  Both sets stay importable through
:func:`get_backend` so tests and the benchmark can compare them.

Array conventions
-----------------
Spectral arrays use the real-FFT half layout ``(c, n, n, n//2 + 1)``.
Wavevectors are passed as three 1-D arrays ``kx, ky, kz`` (odd multipliers,
Nyquist entries zeroed) and the dealias filter as three 1-D boolean axis
masks; the 3-D mask is their outer AND.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

# symmetric tensor storage order: (00, 11, 22, 01, 02, 12)
SYM_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
_SYM_INDEX = np.array([[0, 3, 4], [3, 1, 5], [4, 5, 2]], dtype=np.int64)


# ---------------------------------------------------------------- numpy path

def _np_sym_and_cross(u, B, J, sym_out, cross_out):
    for s, (i, j) in enumerate(SYM_PAIRS):
        np.subtract(u[i] * u[j], B[i] * B[j], out=sym_out[s])
    w0 = u[0] - J[0]
    w1 = u[1] - J[1]
    w2 = u[2] - J[2]
    np.subtract(w1 * B[2], w2 * B[1], out=cross_out[0])
    np.subtract(w2 * B[0], w0 * B[2], out=cross_out[1])
    np.subtract(w0 * B[1], w1 * B[0], out=cross_out[2])


def _np_momentum_project(T, kx, ky, kz, mx, my, mz, out):
    KX = kx[:, None, None]
    KY = ky[None, :, None]
    KZ = kz[None, None, :]
    mask = mx[:, None, None] & my[None, :, None] & mz[None, None, :]
    k2 = KX * KX + KY * KY + KZ * KZ
    inv = np.where(k2 > 0.0, 1.0 / np.where(k2 > 0.0, k2, 1.0), 0.0)
    d0 = 1j * (KX * T[0] + KY * T[3] + KZ * T[4])
    d1 = 1j * (KX * T[3] + KY * T[1] + KZ * T[5])
    d2 = 1j * (KX * T[4] + KY * T[5] + KZ * T[2])
    kd = (KX * d0 + KY * d1 + KZ * d2) * inv
    out[0] = np.where(mask, -(d0 - KX * kd), 0.0)
    out[1] = np.where(mask, -(d1 - KY * kd), 0.0)
    out[2] = np.where(mask, -(d2 - KZ * kd), 0.0)


def _np_curl_masked(F, kx, ky, kz, mx, my, mz, sign, out):
    KX = kx[:, None, None]
    KY = ky[None, :, None]
    KZ = kz[None, None, :]
    mask = mx[:, None, None] & my[None, :, None] & mz[None, None, :]
    c0 = 1j * (KY * F[2] - KZ * F[1])
    c1 = 1j * (KZ * F[0] - KX * F[2])
    c2 = 1j * (KX * F[1] - KY * F[0])
    out[0] = np.where(mask, sign * c0, 0.0)
    out[1] = np.where(mask, sign * c1, 0.0)
    out[2] = np.where(mask, sign * c2, 0.0)


def _np_log_weighted_terms(power, kmag, tau, two_r, out):
    # log(|k|^{2r} e^{2 tau |k|} power); -inf where the term vanishes
    positive = power > 0.0
    lp = np.log(np.where(positive, power, 1.0))
    if two_r == 0.0:
        lk = np.zeros_like(kmag)
        alive = positive
    else:
        lk = two_r * np.log(np.where(kmag > 0.0, kmag, 1.0))
        alive = positive & (kmag > 0.0)
    out[...] = np.where(alive, lk + 2.0 * tau * kmag + lp, -np.inf)


numpy_backend = SimpleNamespace(
    name="numpy",
    sym_and_cross=_np_sym_and_cross,
    momentum_project=_np_momentum_project,
    curl_masked=_np_curl_masked,
    log_weighted_terms=_np_log_weighted_terms,
)


# ---------------------------------------------------------------- numba path

def _build_numba_backend():
    njit = numba.njit(cache=True, fastmath=False)

    @njit
    def sym_and_cross(u, B, J, sym_out, cross_out):
        n0, n1, n2 = u.shape[1], u.shape[2], u.shape[3]
        for i in range(n0):
            for j in range(n1):
                for l in range(n2):
                    u0 = u[0, i, j, l]
                    u1 = u[1, i, j, l]
                    u2 = u[2, i, j, l]
                    b0 = B[0, i, j, l]
                    b1 = B[1, i, j, l]
                    b2 = B[2, i, j, l]
                    sym_out[0, i, j, l] = u0 * u0 - b0 * b0
                    sym_out[1, i, j, l] = u1 * u1 - b1 * b1
                    sym_out[2, i, j, l] = u2 * u2 - b2 * b2
                    sym_out[3, i, j, l] = u0 * u1 - b0 * b1
                    sym_out[4, i, j, l] = u0 * u2 - b0 * b2
                    sym_out[5, i, j, l] = u1 * u2 - b1 * b2
                    w0 = u0 - J[0, i, j, l]
                    w1 = u1 - J[1, i, j, l]
                    w2 = u2 - J[2, i, j, l]
                    cross_out[0, i, j, l] = w1 * b2 - w2 * b1
                    cross_out[1, i, j, l] = w2 * b0 - w0 * b2
                    cross_out[2, i, j, l] = w0 * b1 - w1 * b0

    @njit
    def momentum_project(T, kx, ky, kz, mx, my, mz, out):
        n0, n1, n2 = T.shape[1], T.shape[2], T.shape[3]
        for i in range(n0):
            a = kx[i]
            for j in range(n1):
                b = ky[j]
                for l in range(n2):
                    if not (mx[i] and my[j] and mz[l]):
                        out[0, i, j, l] = 0.0
                        out[1, i, j, l] = 0.0
                        out[2, i, j, l] = 0.0
                        continue
                    c = kz[l]
                    d0 = 1j * (a * T[0, i, j, l] + b * T[3, i, j, l] + c * T[4, i, j, l])
                    d1 = 1j * (a * T[3, i, j, l] + b * T[1, i, j, l] + c * T[5, i, j, l])
                    d2 = 1j * (a * T[4, i, j, l] + b * T[5, i, j, l] + c * T[2, i, j, l])
                    k2 = a * a + b * b + c * c
                    if k2 > 0.0:
                        kd = (a * d0 + b * d1 + c * d2) * (1.0 / k2)
                    else:
                        kd = 0.0j
                    out[0, i, j, l] = -(d0 - a * kd)
                    out[1, i, j, l] = -(d1 - b * kd)
                    out[2, i, j, l] = -(d2 - c * kd)

    @njit
    def curl_masked(F, kx, ky, kz, mx, my, mz, sign, out):
        n0, n1, n2 = F.shape[1], F.shape[2], F.shape[3]
        for i in range(n0):
            a = kx[i]
            for j in range(n1):
                b = ky[j]
                for l in range(n2):
                    if not (mx[i] and my[j] and mz[l]):
                        out[0, i, j, l] = 0.0
                        out[1, i, j, l] = 0.0
                        out[2, i, j, l] = 0.0
                        continue
                    c = kz[l]
                    f0 = F[0, i, j, l]
                    f1 = F[1, i, j, l]
                    f2 = F[2, i, j, l]
                    out[0, i, j, l] = sign * 1j * (b * f2 - c * f1)
                    out[1, i, j, l] = sign * 1j * (c * f0 - a * f2)
                    out[2, i, j, l] = sign * 1j * (a * f1 - b * f0)

    @njit
    def log_weighted_terms(power, kmag, tau, two_r, out):
        flat_p = power.ravel()
        flat_k = kmag.ravel()
        flat_o = out.ravel()
        for idx in range(flat_p.size):
            p = flat_p[idx]
            k = flat_k[idx]
            if p <= 0.0:
                flat_o[idx] = -np.inf
            elif k <= 0.0:
                if two_r == 0.0:
                    flat_o[idx] = np.log(p)
                else:
                    flat_o[idx] = -np.inf
            else:
                flat_o[idx] = two_r * np.log(k) + 2.0 * tau * k + np.log(p)

    return SimpleNamespace(
        name="numba",
        sym_and_cross=sym_and_cross,
        momentum_project=momentum_project,
        curl_masked=curl_masked,
        log_weighted_terms=log_weighted_terms,
    )


_numba_backend = None


def get_backend(name: str | None = None) -> SimpleNamespace:
    """Return the kernel set ``name`` (``"numba"`` / ``"numpy"``), or the active one."""
    global _numba_backend
    if name is None:
        name = ACTIVE
    if name == "numpy":
        return numpy_backend
    if name == "numba":
        if numba is None:
            raise RuntimeError("numba kernels requested but numba is not importable")
        if _numba_backend is None:
            _numba_backend = _build_numba_backend()
        return _numba_backend
    raise ValueError(f"unknown kernel backend {name!r}")


def _select() -> str:
    flag = os.environ.get("HALLMHD_KERNELS", "").strip().lower()
    if flag in ("numpy", "python", "off", "0"):
        return "numpy"
    if flag in ("", "numba", "on", "1"):
        return "numba" if numba is not None else "numpy"
    raise ValueError(f"HALLMHD_KERNELS={flag!r}: expected 'numba' or 'numpy'")


ACTIVE = _select()
kernels = get_backend(ACTIVE)
