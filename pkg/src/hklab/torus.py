"""Fourier exterior calculus on flat tori ``R^n / (Z^n B)``.

A field of degree ``p`` is a real array of shape ``(C(n, p), *grid)`` whose
components are coefficients in Cartesian coordinates.  Derivatives act on the
Fourier side with multipliers ``i k``; on even grids the Nyquist entries of the
multipliers are set to zero so real fields stay real.  Consequently the
constant mode and the pure-Nyquist modes span the kernel of every operator here.
"""

from functools import cached_property
from math import comb

import numpy as np

from .exterior import d_table, star_matrix, basis


class SpectralTorus:
    """Grid and wave numbers of the torus with lattice rows ``basis``."""

    def __init__(self, basis_matrix, shape):
        self.basis = np.array(basis_matrix, dtype=float)
        self.dim = self.basis.shape[0]
        if self.basis.shape != (self.dim, self.dim):
            raise ValueError("basis must be square")
        if np.isscalar(shape):
            shape = (int(shape),) * self.dim
        self.shape = tuple(int(s) for s in shape)
        if len(self.shape) != self.dim:
            raise ValueError("grid shape does not match dimension")

    @classmethod
    def cube(cls, n, dim, length=1.0):
        return cls(length * np.eye(dim), n)

    @property
    def volume(self):
        return float(abs(np.linalg.det(self.basis)))

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    @cached_property
    def fractional(self):
        """Fractional coordinates of grid points, shape ``(*grid, n)``."""
        g = [np.arange(s) / s for s in self.shape]
        return np.stack(np.meshgrid(*g, indexing="ij"), axis=-1)

    @cached_property
    def points(self):
        return self.fractional @ self.basis

    @cached_property
    def integer_modes(self):
        """Mode numbers ``m`` per axis, shape ``(n, *grid)``, Nyquist kept as ``-N/2``."""
        f = [np.fft.fftfreq(s, 1.0 / s) for s in self.shape]
        return np.stack(np.meshgrid(*f, indexing="ij"), axis=0)

    @cached_property
    def nyquist(self):
        """Boolean ``(n, *grid)``: entry is a Nyquist frequency on that axis."""
        out = np.zeros_like(self.integer_modes, dtype=bool)
        for a, s in enumerate(self.shape):
            if s % 2 == 0:
                out[a] = self.integer_modes[a] == -s // 2
        return out

    @cached_property
    def wavevectors(self):
        """``k = 2 pi B^{-1} m`` with Nyquist entries of ``m`` set to zero; shape ``(n, *grid)``."""
        m = np.where(self.nyquist, 0.0, self.integer_modes)
        Binv = np.linalg.inv(self.basis)
        return 2 * np.pi * np.einsum("ab,b...->a...", Binv, m)

    @cached_property
    def k2(self):
        return np.sum(self.wavevectors ** 2, axis=0)

    @cached_property
    def kernel_mask(self):
        """Modes annihilated by every derivative: the constant and pure-Nyquist modes."""
        return np.all((self.integer_modes == 0) | self.nyquist, axis=0)

    def fft(self, f):
        return np.fft.fftn(f, axes=self.axes)

    def ifft(self, F):
        return np.fft.ifftn(F, axes=self.axes).real

    def ncomp(self, degree):
        return comb(self.dim, degree)

    def zeros(self, degree):
        return np.zeros((self.ncomp(degree),) + self.shape)

    def _d_hat(self, F, degree):
        out = np.zeros((self.ncomp(degree + 1),) + F.shape[1:], dtype=complex)
        ik = 1j * self.wavevectors
        for target, source, axis, sign in d_table(self.dim, degree):
            out[target] += sign * ik[axis] * F[source]
        return out

    def d(self, f, degree):
        """Exterior derivative of a degree-``degree`` field."""
        f = np.asarray(f, dtype=float)
        return self.ifft(self._d_hat(self.fft(f), degree))

    def star(self, f, degree):
        return np.einsum("ij,j...->i...", star_matrix(self.dim, degree), f)

    def dstar(self, f, degree):
        """Codifferential ``(-1)^{n(p+1)+1} * d *`` on ``p``-forms."""
        n, p = self.dim, degree
        sign = (-1) ** (n * (p + 1) + 1)
        return sign * self.star(self.d(self.star(f, p), n - p), n - p + 1)

    def laplacian(self, f):
        """Hodge Laplacian; on a flat torus this is ``-sum d^2/dx^2`` per component."""
        return self.ifft(self.k2 * self.fft(f))

    def inverse_laplacian(self, f):
        """Inverse Laplacian on the complement of the kernel modes (kernel content dropped)."""
        F = self.fft(f)
        k2 = np.where(self.kernel_mask, 1.0, self.k2)
        return self.ifft(np.where(self.kernel_mask, 0.0, F / k2))

    def zero_mode(self, f):
        return np.mean(f, axis=self.axes)

    def kernel_part(self, f):
        return self.ifft(np.where(self.kernel_mask, self.fft(f), 0.0))

    def remove_kernel(self, f):
        return self.ifft(np.where(self.kernel_mask, 0.0, self.fft(f)))

    def inner(self, a, b):
        """``L^2`` inner product with respect to the flat metric."""
        return float(self.volume * np.mean(np.sum(a * b, axis=0)))

    def band_limited(self, degree, rng, max_mode=None, amplitude=1.0):
        """Random real field with no Nyquist content and ``|m_a| <= max_mode``."""
        F = self.fft(rng.standard_normal((self.ncomp(degree),) + self.shape))
        keep = ~np.any(self.nyquist, axis=0)
        if max_mode is not None:
            keep &= np.all(np.abs(self.integer_modes) <= max_mode, axis=0)
        f = self.ifft(np.where(keep, F, 0.0))
        return amplitude * f / max(np.abs(f).max(), 1e-300)


def two_form_labels(dim=4):
    return ["".join(map(str, I)) for I in basis(dim, 2)]
