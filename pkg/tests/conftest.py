import numpy as np
import pytest

from loopcmc import expr as ex
from loopcmc.grid import DomainGrid
from loopcmc.weier import WeierstrassData


CATENOID_MU = "-exp(-z)/2"
CATENOID_NU = "-exp(z)"
HELICOID_MU = "-i*exp(-z)/2"
KUSNER_MU = "i*(sqrt(5)*z^3+1)^2/(z^6+sqrt(5)*z^3-1)^2"
KUSNER_NU = "z^2*(z^3-sqrt(5))/(sqrt(5)*z^3+1)"
ORDER5_A = "5.1 + 1.5*z^5 + 0.35*z^10"
ORDER5_P = "1.25*z^3 + 4.15*z^8"


@pytest.fixture
def catenoid():
    return WeierstrassData(CATENOID_MU, CATENOID_NU, 0j)


@pytest.fixture
def helicoid():
    return WeierstrassData(HELICOID_MU, CATENOID_NU, 0j)


def enneper(k):
    return WeierstrassData("1", f"z^{k}", 0j)


@pytest.fixture
def grid21():
    return DomainGrid.square(1.0, 21)


@pytest.fixture
def grid41():
    return DomainGrid.square(1.0, 41)


def catenoid_oracle(grid):
    """Closed form of the catenoid mesh produced by the package conventions
    (antiderivative of the Weierstrass integrand, f(0) = 0):
    f = (2(cosh x cos y - 1), -2 cosh x sin y, -2x)."""
    zz = grid.zz
    x, y = zz.real, zz.imag
    return np.stack([2 * (np.cosh(x) * np.cos(y) - 1),
                     -2 * np.cosh(x) * np.sin(y),
                     -2 * x], axis=-1)


def sphere_oracle(grid, h):
    """Closed form of the plane-data CMC mesh: the sphere of radius 1/h
    through the origin, f = 2/(1 + h^2 |z|^2) (x, y, h |z|^2)."""
    zz = grid.zz
    n2 = 1.0 / (1.0 + (h * np.abs(zz)) ** 2)
    return np.stack([2 * n2 * zz.real, 2 * n2 * zz.imag,
                     2 * h * n2 * np.abs(zz) ** 2], axis=-1)


def rand_twisted_loop(rng, band=4, scale=0.05):
    """Identity plus a random twisted perturbation over the given band
    (determinant is close to, but not exactly, one)."""
    from loopcmc.loops import LoopMat
    c = np.zeros((2 * band + 1, 2, 2), dtype=complex)
    for k in range(-band, band + 1):
        m = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) * scale
        if k % 2 == 0:
            m[0, 1] = m[1, 0] = 0
        else:
            m[0, 0] = m[1, 1] = 0
        c[k + band] = m
    c[band] += np.eye(2)
    return LoopMat(-band, c)


def rand_unimodular_twisted(rng, band=4, scale=0.05):
    """Random twisted loop with determinant exactly one: a product of
    elementary triangular loops with entries at odd powers."""
    from loopcmc.loops import LoopMat, mul
    out = None
    for k in range(-band, band + 1):
        if k % 2 == 0:
            continue
        for slot in ((0, 1), (1, 0)):
            c = np.zeros((abs(k) * 2 + 1, 2, 2), dtype=complex)
            c[abs(k)] = np.eye(2)
            c[k + abs(k)][slot] = scale * (rng.normal() + 1j * rng.normal())
            elem = LoopMat(-abs(k), c).trim()
            out = elem if out is None else mul(out, elem, maxdeg=64)
    return out


def gallery_exprs():
    """Expression texts used across the example gallery."""
    return [
        "z^2", "-exp(-z)/2", "-exp(z)", "exp(z)", "1", "z^3",
        ORDER5_A, ORDER5_P, KUSNER_MU, KUSNER_NU,
        "(1+0.1*z)^2", "2+z",
    ]
