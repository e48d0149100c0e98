"""The semi-flat Calabi-Yau triple on an elliptic fibration chart.

Chart coordinates are ``(z, v)`` with ``z`` on an annulus in the base and
``v`` the fiber coordinate measured from a holomorphic section; the fiber
over ``z`` is ``C / (Z tau1(z) + Z tau2(z))``.  Real coordinates are
``(Re z, Im z, Re v, Im v)``.

Holomorphic data are finite Laurent series so derivatives are exact.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePeriods, NonconstantRatio
from .exterior import d_table, matrix_to_two_form, two_form_to_matrix, wedge
from .forms import FormTriple, wedge_matrix

POLARIZATION_TOL = 1e-12

# Pinned by evaluating both sides on constant data: omega_sf^2 = MA_RATIO * omega+ ^ conj(omega+).
MA_RATIO = 1.0

_DZ = np.array([1.0, 1j, 0.0, 0.0])
_DV = np.array([0.0, 0.0, 1.0, 1j])


@dataclass
class LaurentSeries:
    """``sum_k c_k z^k`` with integer exponents ``k``."""

    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = {int(k): complex(c) for k, c in dict(self.coeffs).items() if c != 0}

    @classmethod
    def constant(cls, c):
        return cls({0: c})

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for k, c in self.coeffs.items():
            out = out + c * z ** k
        return out

    def derivative(self):
        return LaurentSeries({k - 1: k * c for k, c in self.coeffs.items() if k != 0})

    def to_list(self):
        return [[k, c.real, c.imag] for k, c in sorted(self.coeffs.items())]

    @classmethod
    def from_list(cls, terms):
        out = {}
        for k, re, im in terms:
            out[int(k)] = out.get(int(k), 0) + complex(re, im)
        return cls(out)


def _series(x):
    if isinstance(x, LaurentSeries):
        return x
    if isinstance(x, dict):
        return LaurentSeries(x)
    if isinstance(x, (list, tuple)):
        return LaurentSeries.from_list(x)
    return LaurentSeries.constant(x)


@dataclass
class PeriodData:
    """Periods ``tau1, tau2``, twist ``g`` (``omega+ = g dz^dv``), section ``sigma`` and fiber area ``a``."""

    tau1: LaurentSeries
    tau2: LaurentSeries
    g: LaurentSeries = field(default_factory=lambda: LaurentSeries.constant(1.0))
    sigma: LaurentSeries = field(default_factory=LaurentSeries)
    a: float = 1.0

    def __post_init__(self):
        self.tau1, self.tau2 = _series(self.tau1), _series(self.tau2)
        self.g, self.sigma = _series(self.g), _series(self.sigma)
        self.a = float(self.a)
        if self.a <= 0:
            raise ValueError("fiber area a must be positive")

    def polarization(self, z):
        """``Im(conj(tau1) tau2)``, the area of the fiber lattice cell."""
        return np.imag(np.conj(self.tau1(z)) * self.tau2(z))

    def check(self, z):
        W = self.polarization(z)
        if np.any(W <= POLARIZATION_TOL):
            raise DegeneratePeriods(f"Im(conj(tau1) tau2) = {np.min(W):.3e} is not positive")
        return W

    def fiber_coordinate(self, z, w):
        """Fiber coordinate of the point ``w`` relative to the section."""
        return np.asarray(w) - self.sigma(z)

    def to_dict(self):
        return {
            "tau1": self.tau1.to_list(),
            "tau2": self.tau2.to_list(),
            "g": self.g.to_list(),
            "sigma": self.sigma.to_list(),
            "a": self.a,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            LaurentSeries.from_list(d["tau1"]),
            LaurentSeries.from_list(d["tau2"]),
            LaurentSeries.from_list(d.get("g", [[0, 1.0, 0.0]])),
            LaurentSeries.from_list(d.get("sigma", [])),
            d.get("a", 1.0),
        )


def gamma(pd, z, v):
    """Connection term; real-linear in ``v`` and shifting by ``m tau1' + n tau2'``
    when ``v`` moves by ``m tau1 + n tau2``."""
    W = pd.check(z)
    t1, t2 = pd.tau1(z), pd.tau2(z)
    d1, d2 = pd.tau1.derivative()(z), pd.tau2.derivative()(z)
    v = np.asarray(v, dtype=complex)
    return (np.imag(np.conj(t1) * v) * d2 - np.imag(np.conj(t2) * v) * d1) / W


def _forms(pd, z, v):
    """Realified ``omega_sf`` and complex ``omega+`` coefficients."""
    z = np.asarray(z, dtype=complex)
    v = np.asarray(v, dtype=complex)
    z, v = np.broadcast_arrays(z, v)
    W = pd.check(z)
    G = gamma(pd, z, v)
    gz = pd.g(z)
    # dv - Gamma dz as a complex 1-form; (i/2) theta ^ conj(theta) = Re(theta) ^ Im(theta)
    theta = _DV - G[..., None] * _DZ
    vertical = wedge(theta.real, theta.imag, 1, 1)
    horizontal = wedge(_DZ.real, _DZ.imag, 1, 1)  # (i/2) dz ^ dzbar
    omega1 = (2 * np.abs(gz) ** 2 * W / pd.a)[..., None] * horizontal + (pd.a / W)[..., None] * vertical
    dzdv = wedge(_DZ, _DV, 1, 1)
    omega_plus = gz[..., None] * dzdv
    return omega1, omega_plus


def omega_sf(pd, z, v):
    """The semi-flat triple at ``(z, v)``.

    The second and third forms are ``sqrt(2 MA_RATIO)`` times ``Re`` and ``Im``
    of ``g dz^dv`` so the triple is exactly compatible; volume is ``omega1^2 / 2``.
    """
    omega1, omega_plus = _forms(pd, z, v)
    s = np.sqrt(2 * MA_RATIO)
    omega = np.stack([omega1, s * omega_plus.real, s * omega_plus.imag], axis=-2)
    volume = 2 * MA_RATIO * np.abs(pd.g(np.broadcast_arrays(np.asarray(z), np.asarray(v))[0])) ** 2
    return FormTriple(omega, volume)


def omega_plus(pd, z, v):
    """Unscaled ``g dz^dv`` as complex coefficients."""
    return _forms(pd, z, v)[1]


def ma_ratio(pd, z, v):
    """Pointwise ``omega_sf^2 / (omega+ ^ conj(omega+))``."""
    omega1, op = _forms(pd, z, v)
    w = np.stack([omega1, op.real, op.imag], axis=-2)
    M = wedge_matrix(w)
    return M[..., 0, 0] / (M[..., 1, 1] + M[..., 2, 2])


def check_ma_ratio(pd, z, v, tol=1e-9):
    """Return the Monge-Ampere constant, raising if it varies over the sample points."""
    r = np.atleast_1d(ma_ratio(pd, z, v))
    spread = float(np.abs(r - MA_RATIO).max())
    if spread > tol:
        raise NonconstantRatio(f"ratio deviates from {MA_RATIO} by {spread:.3e}")
    return float(np.mean(r))


def lattice_shift_residual(pd, z, v, m, n):
    """``|T^* omega_sf - omega_sf|`` at ``(z, v)`` for ``T(z, v) = (z, v + m tau1(z) + n tau2(z))``."""
    z = np.asarray(z, dtype=complex)
    v = np.asarray(v, dtype=complex)
    m = np.asarray(m)
    n = np.asarray(n)
    shift = m * pd.tau1(z) + n * pd.tau2(z)
    dshift = m * pd.tau1.derivative()(z) + n * pd.tau2.derivative()(z)
    after = omega_sf(pd, z, v + shift).omega
    before = omega_sf(pd, z, v).omega
    # Jacobian of T in (Re z, Im z, Re v, Im v): dv' = dv + dshift dz
    J = np.zeros(np.shape(z) + (4, 4))
    J[..., 0, 0] = J[..., 1, 1] = J[..., 2, 2] = J[..., 3, 3] = 1.0
    J[..., 2, 0] = dshift.real
    J[..., 2, 1] = -dshift.imag
    J[..., 3, 0] = dshift.imag
    J[..., 3, 1] = dshift.real
    Wm = two_form_to_matrix(after)
    Jx = J[..., None, :, :]
    pulled = matrix_to_two_form(np.swapaxes(Jx, -1, -2) @ Wm @ Jx)
    return float(np.abs(pulled - before).max())


def _coeff_field(pd, points):
    """omega coefficients (..., 3, 6) at real points (..., 4)."""
    z = points[..., 0] + 1j * points[..., 1]
    v = points[..., 2] + 1j * points[..., 3]
    return omega_sf(pd, z, v).omega


def check_closed(pd, points, h):
    """Max over sample points of the central-difference exterior derivative of the triple.

    ``points`` is an array (N, 4) of real chart points, ``h`` the difference step.
    The truncation error is O(h^2).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    grads = []
    for axis in range(4):
        e = np.zeros(4)
        e[axis] = h
        grads.append((_coeff_field(pd, points + e) - _coeff_field(pd, points - e)) / (2 * h))
    grads = np.stack(grads, axis=-1)  # (N, 3, 6, 4)
    d = np.zeros(points.shape[:-1] + (3, 4))
    for target, source, axis, sign in d_table(4, 2):
        d[..., target] += sign * grads[..., source, axis]
    return float(np.abs(d).max())


def fiber_area(pd, z, n=128):
    """Midpoint-rule integral of ``omega_sf`` over the fiber at ``z``."""
    z = complex(z)
    t1, t2 = complex(pd.tau1(z)), complex(pd.tau2(z))
    s = (np.arange(n) + 0.5) / n
    S, T = np.meshgrid(s, s, indexing="ij")
    v = S * t1 + T * t2
    omega = omega_sf(pd, np.full(v.shape, z), v).omega
    jac = np.imag(np.conj(t1) * t2)  # d(Re v) ^ d(Im v) = jac ds ^ dt
    return float(omega[..., 0, 5].mean() * jac)
