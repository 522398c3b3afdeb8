"""Numerical Iwasawa and Birkhoff factorization of twisted loops.

Iwasawa: a loop X with unit determinant splits as X = F B with F unitary on
the circle and B extending holomorphically into the disc, normalized so
B(0) = diag(rho, 1/rho) with rho real positive.  The factor B is obtained
as the canonical right spectral factor of the positive loop P = X* X via
Cholesky factorization of a finite block-Toeplitz section (Bauer's method):
the bottom block-row of the Cholesky factor of the section built from the
reversed symbol converges to the factor's coefficients.

Birkhoff: X = X- X+ with X-(infinity) = I, computed from the square
block-Toeplitz linear system expressing that X times a plus-loop inverse
has no positive powers.  A large condition number signals leaving the open
dense set on which the normalized factorization exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loops import (LoopMat, LoopError, mul, star, check_membership,
                    circle_points)

__all__ = ["FactorResult", "FactorError", "BigCellError", "iwasawa",
           "birkhoff", "iwasawa_batch", "DEFAULT_MARGIN"]

DEFAULT_MARGIN = 8


class FactorError(ArithmeticError):
    pass


class BigCellError(FactorError):
    pass


@dataclass
class FactorResult:
    unitary_part: LoopMat | None
    plus_part: LoopMat
    minus_part: LoopMat | None
    residual: float
    condition: float

    # convenience for Iwasawa results
    @property
    def rho(self):
        return float(self.plus_part.coeff(0)[0, 0].real)


# ---------------------------------------------------------------------------
# Batched core (arrays shaped (n, nk, 2, 2)); LoopMat wrappers below.

def _gram_coeffs(coeffs):
    """P_m = sum_j X_j^H X_{j+m} for m = 0..band; (n, band+1, 2, 2)."""
    n, nk = coeffs.shape[:2]
    out = np.empty((n, nk, 2, 2), dtype=complex)
    for m in range(nk):
        out[:, m] = np.einsum("ntji,ntjl->nil",
                              np.conj(coeffs[:, :nk - m]), coeffs[:, m:])
    return out


def _toeplitz_section(p_pos, ncap):
    """Block-Toeplitz section T[i,j] = P_{j-i} of the reversed symbol, as a
    scalar matrix of size 2*(ncap+1); p_pos holds P_0..P_band."""
    n, nb = p_pos.shape[:2]
    band = nb - 1
    # padded table of P_m for m = -band..band
    table = np.zeros((n, 2 * band + 1, 2, 2), dtype=complex)
    table[:, band:] = p_pos
    table[:, :band] = np.conj(np.transpose(p_pos[:, 1:][:, ::-1], (0, 1, 3, 2)))
    idx = np.arange(ncap + 1)
    d = np.clip(idx[None, :] - idx[:, None], -band - 1, band + 1)
    inside = np.abs(d) <= band
    dmap = np.where(inside, d + band, 0)
    blocks = table[:, dmap] * inside[None, :, :, None, None]
    t = np.transpose(blocks, (0, 1, 3, 2, 4)).reshape(
        n, 2 * (ncap + 1), 2 * (ncap + 1))
    return t


def _bauer_factor(coeffs, margin, p_pos=None):
    """Spectral factor coefficients B_0..B_ncap with P = B* B, batched."""
    band = coeffs.shape[1] - 1
    ncap = band + margin
    if p_pos is None:
        p_pos = _gram_coeffs(coeffs)
    t = _toeplitz_section(p_pos, ncap)
    try:
        chol = np.linalg.cholesky(t)
        ok = np.ones(coeffs.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        # isolate failures node by node
        n = coeffs.shape[0]
        chol = np.zeros_like(t)
        ok = np.zeros(n, dtype=bool)
        for idx in range(n):
            try:
                chol[idx] = np.linalg.cholesky(t[idx])
                ok[idx] = True
            except np.linalg.LinAlgError:
                pass
    # bottom block-row, reversed: C_k = L[last, ncap-k]; B_k = C_k^H
    last = 2 * ncap
    bcoef = np.empty((coeffs.shape[0], ncap + 1, 2, 2), dtype=complex)
    for k in range(ncap + 1):
        blk = chol[:, last:last + 2, last - 2 * k:last - 2 * k + 2]
        bcoef[:, k] = np.conj(np.transpose(blk, (0, 2, 1)))
    diag = np.einsum("nii->ni", chol[:, :, :]).real
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(ok, (np.max(diag, axis=1) /
                             np.maximum(np.min(diag, axis=1), 1e-300)) ** 2,
                        np.inf)
    return bcoef, ok, cond


def _wilson_polish(p_pos, bcoef, iters):
    """Quadratically convergent refinement of the spectral factor.

    With G = B^{-*} P B^{-1} (= I at the exact factor), the update
    B <- (I + [G - I]_half+) B halves the error exponent.  The plus-part
    takes positive Fourier modes fully and half of the zero mode; twisting
    keeps B(0) diagonal positive along the way.
    """
    n, nb = bcoef.shape[:2]
    band = p_pos.shape[1] - 1
    m = 1 << int(np.ceil(np.log2(max(64, 6 * nb))))
    lams = np.exp(2j * np.pi * np.arange(m) / m)
    # P on the circle from its banded coefficients
    pv = np.zeros((n, m, 2, 2), dtype=complex)
    for k in range(band + 1):
        ph = lams ** k
        pv += p_pos[:, k][:, None] * ph[None, :, None, None]
        if k > 0:
            pv += np.conj(np.transpose(p_pos[:, k], (0, 2, 1)))[:, None] \
                * np.conj(ph)[None, :, None, None]
    eye = np.eye(2, dtype=complex)
    for _ in range(iters):
        pows = lams[None, :] ** np.arange(nb)[:, None]
        bv = np.einsum("ks,nkij->nsij", pows, bcoef)
        binv = np.linalg.inv(bv)
        g = np.einsum("nsji,nsjl,nslm->nsim", np.conj(binv), pv, binv)
        e = g - eye[None, None]
        # fft with numpy's sign convention extracts the coefficient of
        # power +m at index m; keep positive modes plus half the zero mode
        em = np.fft.fft(e, axis=1) / m
        em[:, 0] *= 0.5
        em[:, m // 2:] = 0.0
        theta = np.fft.ifft(em, axis=1) * m + eye[None, None]
        bv_new = np.einsum("nsij,nsjl->nsil", theta, bv)
        bm = np.fft.fft(bv_new, axis=1) / m
        bcoef = bm[:, :nb]
    return bcoef


def _solve_unitary(coeffs, lo, bcoef, extra, tail_tol=1e-13):
    """F with F B = X, forward substitution over powers (B_0 diagonal).

    The series of F decays geometrically (the plus factor is invertible in
    the disc); powers are computed past the input band until coefficients
    fall below ``tail_tol`` relative to the input scale, capped at
    ``nk + extra``.
    """
    n, nk = coeffs.shape[:2]
    nb = bcoef.shape[1]
    nf = nk + extra
    scale = max(float(np.max(np.abs(coeffs))), 1.0)
    f = np.zeros((n, nf, 2, 2), dtype=complex)
    b0 = bcoef[:, 0]
    inv_b0 = np.zeros_like(b0)
    inv_b0[:, 0, 0] = 1.0 / b0[:, 0, 0]
    inv_b0[:, 1, 1] = 1.0 / b0[:, 1, 1]
    used = nf
    for m in range(nf):
        rhs = coeffs[:, m].copy() if m < nk else np.zeros((n, 2, 2), complex)
        jmax = min(m, nb - 1)
        for j in range(1, jmax + 1):
            rhs -= np.einsum("nij,njl->nil", f[:, m - j], bcoef[:, j])
        f[:, m] = np.einsum("nij,njl->nil", rhs, inv_b0)
        if m >= nk and float(np.max(np.abs(f[:, m]))) < tail_tol * scale:
            used = m + 1
            break
    return f[:, :used], lo


def _sample_eval(coeffs, lo, lams):
    pows = lams[:, None] ** (lo + np.arange(coeffs.shape[1]))[None, :]
    return np.einsum("sk,nkij->nsij", pows, coeffs)


def iwasawa_batch(lo, coeffs, margin=DEFAULT_MARGIN, extra=None, nsample=32,
                  polish=2):
    """Batched Iwasawa factorization of loops given as coefficient arrays.

    Parameters
    ----------
    lo : int
        Lowest power of the input loops.
    coeffs : (n, nk, 2, 2) complex ndarray
    margin : int
        Toeplitz truncation is input bandwidth + margin.
    extra : int
        Cap on additional positive powers kept on the unitary factor
        (default 4 * margin + 32; the solve stops early once the
        coefficients fall below the tail tolerance).
    polish : int
        Wilson refinement sweeps applied to the Bauer seed.

    Returns a dict with the unitary factor (f_lo, f), the plus factor b
    (powers 0..), rho, per-node reconstruction and unitarity residuals
    (max over sampled circle points), ok flags and condition estimates.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    if extra is None:
        extra = 4 * margin + 32
    p_pos = _gram_coeffs(coeffs)
    bcoef, ok, cond = _bauer_factor(coeffs, margin, p_pos)
    bcoef[~ok] = np.eye(2)[None, None]
    if polish > 0:
        bcoef = _wilson_polish(p_pos, bcoef, polish)
        bcoef[~ok] = np.eye(2)[None, None]
    f, f_lo = _solve_unitary(coeffs, lo, bcoef, extra)
    lams = circle_points(nsample)
    xv = _sample_eval(coeffs, lo, lams)
    fv = _sample_eval(f, f_lo, lams)
    bv = _sample_eval(bcoef, 0, lams)
    recon = np.einsum("nsij,nsjl->nsil", fv, bv) - xv
    resid = np.max(np.abs(recon), axis=(1, 2, 3))
    gram = np.einsum("nsij,nskj->nsik", fv, np.conj(fv))
    unit = np.max(np.abs(gram - np.eye(2)[None, None]), axis=(1, 2, 3))
    rho = bcoef[:, 0, 0, 0].real
    return {"f_lo": f_lo, "f": f, "b": bcoef, "rho": rho,
            "residual": resid, "unitary_residual": unit,
            "ok": ok, "condition": cond}


def iwasawa(phi: LoopMat, margin: int = DEFAULT_MARGIN) -> FactorResult:
    """Iwasawa decomposition phi = F B (F unitary loop, B plus-loop with
    B(0) = diag(rho, 1/rho), rho > 0).

    Raises FactorError when the Gram section is not positive definite
    (the input is not an invertible loop at this truncation).
    """
    phi = phi.trim(0.0)
    out = iwasawa_batch(phi.lo, phi.coeffs[None, :, :, :], margin=margin)
    if not out["ok"][0]:
        raise FactorError("Gram matrix not positive definite")
    f = LoopMat(out["f_lo"], out["f"][0]).trim(1e-300)
    b = LoopMat(0, out["b"][0]).trim(1e-300)
    return FactorResult(unitary_part=f, plus_part=b, minus_part=None,
                        residual=float(out["residual"][0]),
                        condition=float(out["condition"][0]))


# ---------------------------------------------------------------------------
# Birkhoff

def birkhoff(x: LoopMat, margin: int = DEFAULT_MARGIN,
             cond_limit: float = 1e12) -> FactorResult:
    """Normalized Birkhoff factorization x = x_minus x_plus with
    x_minus(infinity) = I.

    Solves the square block-Toeplitz system for y = x_plus^{-1} (a plus
    loop) such that x y has no positive powers and unit constant term.
    Condition number above ``cond_limit`` raises BigCellError.
    """
    x = x.trim(0.0)
    band = max(x.hi, 0)
    ncap = band + margin
    # unknowns y_0..y_ncap; equations: (x y)_m = delta_{m0} I for m=0..ncap
    a = np.zeros((2 * (ncap + 1), 2 * (ncap + 1)), dtype=complex)
    for m in range(ncap + 1):
        for k in range(ncap + 1):
            c = x.coeff(m - k)
            a[2 * m:2 * m + 2, 2 * k:2 * k + 2] = c
    rhs = np.zeros((2 * (ncap + 1), 2), dtype=complex)
    rhs[0, 0] = 1.0
    rhs[1, 1] = 1.0
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > cond_limit:
        raise BigCellError(
            f"Birkhoff system condition {cond:.3e} exceeds {cond_limit:.0e}; "
            "loop is outside the big cell at this truncation")
    y = np.linalg.solve(a, rhs)
    ycoef = y.reshape(ncap + 1, 2, 2)
    yloop = LoopMat(0, ycoef).trim(1e-300)
    prod = mul(x, yloop, maxdeg=abs(x.lo) + 2 * ncap + 4)
    minus = prod.window(prod.lo, 0)
    tail = max((float(np.max(np.abs(prod.coeff(k)))) for k in prod.powers if k > 0),
               default=0.0)
    plus = inverse_plus(yloop)
    recon = mul(minus, plus, maxdeg=abs(minus.lo) + plus.hi + 4)
    lams = circle_points(32)
    resid = 0.0
    for lam in lams:
        from .loops import eval_lambda
        resid = max(resid, float(np.max(np.abs(
            eval_lambda(recon, lam) - eval_lambda(x, lam)))))
    return FactorResult(unitary_part=None, plus_part=plus, minus_part=minus,
                        residual=float(max(resid, tail)), condition=float(cond))


def inverse_plus(y: LoopMat, extra=16) -> LoopMat:
    """Inverse of a plus loop by forward recursion, carrying ``extra``
    powers beyond the input band for the (geometrically decaying) tail."""
    if y.lo != 0:
        y = y.window(0, max(y.hi, 0))
    n = y.coeffs.shape[0]
    nout = n + extra
    z = np.zeros((nout, 2, 2), dtype=complex)
    y0inv = np.linalg.inv(y.coeffs[0])
    z[0] = y0inv
    for m in range(1, nout):
        acc = np.zeros((2, 2), dtype=complex)
        for j in range(1, min(m, n - 1) + 1):
            acc += z[m - j] @ y.coeffs[j]
        z[m] = -acc @ y0inv
    return LoopMat(0, z).trim(1e-300)
