"""Eigenvalues, shifted singular values and resolvent traces of the Hermitization.

The Hermitization of ``X`` at ``z`` is the ``2n x 2n`` matrix
``H = [[0, X - z], [(X - z)^*, 0]]`` whose spectrum is ``{+-s_i}`` with ``s_i``
the singular values of ``X - z``.  All resolvent functionals on the imaginary
axis are closed-form sums over ``s_i``; nothing here inverts ``H``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    """LAPACK did not converge."""


@dataclass
class Spectrum:
    values: np.ndarray
    residual: float = float("nan")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class SingularSpectrum:
    z: complex
    values: np.ndarray  # ascending

    @property
    def n(self) -> int:
        return len(self.values)


def eigvals(A: np.ndarray, residual: bool = False) -> Spectrum:
    """Eigenvalues of a dense complex matrix (LAPACK ``zgeev``).

    With ``residual=True`` eigenvectors are computed too and the field holds
    ``max_i ||A v_i - lam_i v_i|| / (||A||_F ||v_i||)``.
    """
    A = np.asarray(A, dtype=complex)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    try:
        if residual:
            lam, V = np.linalg.eig(A)
            norm = np.linalg.norm(A) or 1.0
            res = np.linalg.norm(A @ V - V * lam, axis=0) / np.linalg.norm(V, axis=0)
            return Spectrum(lam, float(res.max() / norm))
        return Spectrum(np.linalg.eigvals(A))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc


def shifted_singulars(X: np.ndarray, z: complex) -> SingularSpectrum:
    """Ascending singular values of ``X - z``."""
    X = np.asarray(X, dtype=complex)
    n = X.shape[0]
    try:
        s = np.linalg.svd(X - z * np.eye(n), compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD failed: {exc}") from exc
    return SingularSpectrum(complex(z), np.sort(s))


def hermitization(X: np.ndarray, z: complex) -> np.ndarray:
    """Explicit ``H^z``; only used by tests and small oracles."""
    n = X.shape[0]
    Y = X - z * np.eye(n)
    return np.block([[np.zeros((n, n)), Y], [Y.conj().T, np.zeros((n, n))]])


def _check_eta(eta: float) -> float:
    if not eta > 0:
        raise ValueError("eta must be positive")
    return float(eta)


def im_trace_resolvent(S: SingularSpectrum, eta: float | np.ndarray) -> float | np.ndarray:
    """``Im Tr G^z(i eta) = 2 sum_i eta / (s_i^2 + eta^2)``; vectorised over ``eta``."""
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(~(eta_arr > 0)):
        raise ValueError("eta must be positive")
    s2 = S.values[:, None] ** 2
    out = 2.0 * np.sum(eta_arr.ravel() / (s2 + eta_arr.ravel() ** 2), axis=0)
    return float(out[0]) if eta_arr.ndim == 0 else out.reshape(eta_arr.shape)


def avg_trace_G(S: SingularSpectrum, eta: float) -> complex:
    """Normalised trace ``<G^z(i eta)> = Tr G / (2n)``, purely imaginary."""
    eta = _check_eta(eta)
    return 1j * float(np.sum(eta / (S.values**2 + eta**2))) / S.n


def spectral_radius(S: Spectrum) -> float:
    if len(S.values) == 0:
        raise ValueError("empty spectrum")
    return float(np.max(np.abs(S.values)))


def write_spectrum_csv(path, spec: Spectrum | SingularSpectrum) -> None:
    """Dump ``(index, re, im)`` rows, or ``(index, s)`` for singular values."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(spec, SingularSpectrum):
            w.writerow(["index", "s"])
            for i, s in enumerate(spec.values):
                w.writerow([i, repr(float(s))])
        else:
            w.writerow(["index", "re", "im"])
            for i, v in enumerate(spec.values):
                w.writerow([i, repr(float(v.real)), repr(float(v.imag))])


EIG_BACKENDS = ("numpy", "torch64")


def eigvals_batch(stack: np.ndarray, backend: str = "numpy") -> np.ndarray:
    """Eigenvalues of a stack ``(m, n, n)``.

    ``backend="torch64"`` runs the same LAPACK algorithm in single-precision
    complex through PyTorch (about 2x faster at ``n = 1024`` on one core);
    eigenvalues are then accurate to ~1e-6, which is ample for
    distributional statistics but not for identities.
    """
    stack = np.asarray(stack)
    if backend == "numpy":
        try:
            return np.linalg.eigvals(stack.astype(complex, copy=False))
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc
    if backend == "torch64":
        try:
            import torch
        except ImportError as exc:  # optional dependency
            raise ImportError("backend 'torch64' needs the optional 'torch' package") from exc
        out = torch.linalg.eigvals(torch.from_numpy(stack.astype(np.complex64)))
        return out.numpy().astype(complex)
    raise ValueError(f"unknown backend {backend!r}; choose from {EIG_BACKENDS}")
