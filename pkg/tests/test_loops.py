import numpy as np
import pytest

from loopcmc import loops
from loopcmc.loops import (LoopMat, WindowOverflowError, check_membership,
                           constant, det_series, eval_lambda, from_text,
                           hat_extend, identity, inverse, lambda_derivative_at,
                           mul, star, to_text)
from conftest import rand_twisted_loop


def phi0_loop(g):
    """Minimal-limit holomorphic frame [[1, 0], [g lam^-1, 1]]."""
    c = np.zeros((2, 2, 2), dtype=complex)
    c[0, 1, 0] = g
    c[1, 0, 0] = 1
    c[1, 1, 1] = 1
    return LoopMat(-1, c)


def f0_b0_closed_form(g):
    """Explicit factorization of phi0: unitary part
    (1+|g|^2)^{-1/2} [[1, -lam conj(g)], [lam^-1 g, 1]] and plus part
    [[d, lam conj(g)/d], [0, 1/d]], d = sqrt(1+|g|^2)."""
    d = np.sqrt(1 + abs(g) ** 2)
    f = np.zeros((3, 2, 2), dtype=complex)
    f[0, 1, 0] = g / d
    f[1, 0, 0] = 1 / d
    f[1, 1, 1] = 1 / d
    f[2, 0, 1] = -np.conj(g) / d
    b = np.zeros((2, 2, 2), dtype=complex)
    b[0, 0, 0] = d
    b[0, 1, 1] = 1 / d
    b[1, 0, 1] = np.conj(g) / d
    return LoopMat(-1, f), LoopMat(0, b)


def random_su2(rng):
    a = rng.normal(size=4)
    a /= np.linalg.norm(a)
    return np.array([[a[0] + 1j * a[1], a[2] + 1j * a[3]],
                     [-a[2] + 1j * a[3], a[0] - 1j * a[1]]])


class TestMul:
    def test_identity(self):
        rng = np.random.default_rng(0)
        a = rand_twisted_loop(rng)
        p = mul(identity(), a)
        for k in a.powers:
            assert np.allclose(p.coeff(k), a.coeff(k))

    def test_hat_extend_inverse(self):
        rng = np.random.default_rng(1)
        e0 = random_su2(rng)
        h = hat_extend(e0)
        hinv = hat_extend(e0.conj().T)
        p = mul(h, hinv)
        assert np.allclose(eval_lambda(p, 1.0), np.eye(2), atol=1e-14)
        assert check_membership(p, "unitary") < 1e-13

    def test_explicit_factorization_recomposes(self):
        # unitary part times plus part reproduces the minimal-limit frame
        for g in (0.3 - 1.2j, 2.5j, -1.0 + 0.4j):
            f, b = f0_b0_closed_form(g)
            prod = mul(f, b)
            phi = phi0_loop(g)
            for k in range(-2, 3):
                assert np.allclose(prod.coeff(k), phi.coeff(k), atol=1e-12)

    def test_associative_without_truncation(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            a = rand_twisted_loop(rng, band=2)
            b = rand_twisted_loop(rng, band=2)
            c = rand_twisted_loop(rng, band=2)
            lhs = mul(mul(a, b, maxdeg=12), c, maxdeg=12)
            rhs = mul(a, mul(b, c, maxdeg=12), maxdeg=12)
            for k in range(-6, 7):
                assert np.allclose(lhs.coeff(k), rhs.coeff(k), atol=1e-13)

    def test_parity_preserved(self):
        rng = np.random.default_rng(3)
        a = rand_twisted_loop(rng)
        b = rand_twisted_loop(rng)
        assert check_membership(mul(a, b, maxdeg=16), "twisted") < 1e-14
        assert check_membership(hat_extend(random_su2(rng)), "twisted") == 0.0

    def test_window_overflow_raises(self):
        rng = np.random.default_rng(4)
        a = rand_twisted_loop(rng, band=4, scale=0.5)
        with pytest.raises(WindowOverflowError):
            mul(a, a, maxdeg=2, discard_tol=1e-12)

    def test_discard_tracking(self):
        rng = np.random.default_rng(5)
        a = rand_twisted_loop(rng, band=4, scale=0.5)
        p = mul(a, a, maxdeg=4, discard_tol=np.inf)
        assert p.truncation_discard > 0


class TestHatExtend:
    def test_identity_stays_identity(self):
        h = hat_extend(np.eye(2))
        assert h.lo == 0 and h.hi == 0
        assert np.allclose(h.coeff(0), np.eye(2))

    def test_offdiagonal_moves_to_odd_powers(self):
        rng = np.random.default_rng(6)
        e0 = random_su2(rng)
        h = hat_extend(e0)
        assert h.coeff(1)[0, 1] == pytest.approx(e0[0, 1])
        assert h.coeff(-1)[1, 0] == pytest.approx(e0[1, 0])
        assert h.coeff(0)[0, 0] == pytest.approx(e0[0, 0])
        assert h.coeff(0)[0, 1] == 0

    def test_diagonal_input_is_lambda_free(self):
        th = 0.7
        e0 = np.diag([np.exp(1j * th), np.exp(-1j * th)])
        h = hat_extend(e0)
        assert h.lo == 0 and h.hi == 0

    def test_non_unitary_rejected(self):
        with pytest.raises(loops.LoopError):
            hat_extend(np.array([[2.0, 0], [0, 0.5]]))


class TestEval:
    def test_identity_everywhere(self):
        for lam in (1.0, 1j, np.exp(0.3j)):
            assert np.allclose(eval_lambda(identity(), lam), np.eye(2))

    def test_hat_extend_at_one(self):
        rng = np.random.default_rng(7)
        e0 = random_su2(rng)
        assert np.allclose(eval_lambda(hat_extend(e0), 1.0), e0)

    def test_phi0_at_one(self):
        g = 0.8 - 0.1j
        v = eval_lambda(phi0_loop(g), 1.0)
        assert np.allclose(v, np.array([[1, 0], [g, 1]]))

    def test_derivative_constant_zero(self):
        assert np.allclose(lambda_derivative_at(identity(), 1.0), 0.0)

    def test_derivative_single_power(self):
        c = np.zeros((1, 2, 2), dtype=complex)
        c[0, 0, 1] = 2.0
        a = LoopMat(1, c)
        assert np.allclose(lambda_derivative_at(a, 1.0), c[0])

    def test_unit_determinant_on_circle(self):
        rng = np.random.default_rng(8)
        f = hat_extend(random_su2(rng))
        for _ in range(2):
            f = mul(f, hat_extend(random_su2(rng)))
        for lam in np.exp(2j * np.pi * np.arange(16) / 16):
            assert abs(np.linalg.det(eval_lambda(f, lam)) - 1.0) < 1e-10


class TestMembership:
    def test_identity_belongs_everywhere(self):
        i = identity()
        for which in ("twisted", "unitary", "plus", "minus-star", "plus-P"):
            assert check_membership(i, which) <= 1e-15

    def test_explicit_unitary_part(self):
        f, b = f0_b0_closed_form(1.1 + 0.7j)
        assert check_membership(f, "unitary") <= 1e-12
        assert check_membership(b, "plus-P") <= 1e-14

    def test_phi0_minus_star(self):
        assert check_membership(phi0_loop(2.0 - 1.0j), "minus-star") == 0.0

    def test_nonmember_detected(self):
        assert check_membership(phi0_loop(1.0), "plus") == 1.0
        c = np.zeros((1, 2, 2), dtype=complex)
        c[0] = np.diag([2.0, 0.5])
        assert check_membership(LoopMat(0, c), "unitary") > 1.0


class TestInverse:
    def test_plus_loop_exact(self):
        _, b = f0_b0_closed_form(0.9 + 0.4j)
        binv = inverse(b)
        p = mul(b, binv)
        assert np.allclose(eval_lambda(p, 1.0), np.eye(2), atol=1e-12)
        assert check_membership(p, "minus-star") < 1e-12

    def test_unitary_uses_star(self):
        f, _ = f0_b0_closed_form(0.5 - 0.3j)
        finv = inverse(f, unitary_tol=1e-10)
        s = star(f)
        for k in s.powers:
            assert np.allclose(finv.coeff(k), s.coeff(k))

    def test_parity_preserved_by_inverse(self):
        _, b = f0_b0_closed_form(0.8 + 0.2j)
        assert check_membership(inverse(b), "twisted") <= 1e-13
        f, _ = f0_b0_closed_form(0.8 + 0.2j)
        assert check_membership(inverse(f, unitary_tol=1e-8),
                                "twisted") <= 1e-13

    def test_det_series(self):
        g = 1.4 + 0.2j
        lo, d = det_series(phi0_loop(g))
        # det = 1 identically: single unit coefficient at power 0
        nz = np.nonzero(np.abs(d) > 1e-14)[0]
        assert len(nz) == 1 and lo + nz[0] == 0
        assert d[nz[0]] == pytest.approx(1.0)


class TestSerialization:
    def test_roundtrip(self):
        rng = np.random.default_rng(9)
        a = rand_twisted_loop(rng, band=3)
        b = from_text(to_text(a))
        assert b.lo == a.lo and b.hi == a.hi
        assert np.allclose(a.coeffs, b.coeffs)
