"""Compiled inner loops for the phase-plane shooting solver.

The traveling-wave ODE phi'' + c phi' + g(phi) = 0 is integrated as the
first-order system (phi, p) with fixed-step RK4.  Only polynomial g (every
frozen or averaged cubic) takes this path; tabulated nonlinearities use the
pure-python twin in frontwave.
"""

import numpy as np
from numba import njit

OUTCOME_TURNBACK = 0
OUTCOME_OVERSHOOT = 1
OUTCOME_UNDECIDED = 2


@njit(cache=True)
def _poly3(c, u):
    return ((c[0] * u + c[1]) * u + c[2]) * u + c[3]


@njit(cache=True)
def _rk4_step(coeffs, c, phi, p, h):
    k1p = p
    k1q = -c * p - _poly3(coeffs, phi)
    phi2 = phi + 0.5 * h * k1p
    p2 = p + 0.5 * h * k1q
    k2p = p2
    k2q = -c * p2 - _poly3(coeffs, phi2)
    phi3 = phi + 0.5 * h * k2p
    p3 = p + 0.5 * h * k2q
    k3p = p3
    k3q = -c * p3 - _poly3(coeffs, phi3)
    phi4 = phi + h * k3p
    p4 = p + h * k3q
    k4p = p4
    k4q = -c * p4 - _poly3(coeffs, phi4)
    phi_new = phi + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    p_new = p + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    return phi_new, p_new


@njit(cache=True)
def shoot_classify(coeffs, c, phi0, p0, h, xi_max, floor, capture_p):
    """Integrate until the trajectory overshoots phi=0 or turns back (p>=0)."""
    phi = phi0
    p = p0
    xi = 0.0
    while xi < xi_max:
        phi, p = _rk4_step(coeffs, c, phi, p, h)
        xi += h
        if phi <= floor:
            return OUTCOME_OVERSHOOT
        if p >= 0.0:
            return OUTCOME_TURNBACK
        # capture by an interior equilibrium (stable node for large |c|): the
        # front slows to a halt where g > 0, which never happens on the
        # connecting orbit; same side as a turnback
        if 1e-3 < phi < 0.98 and (p >= -1e-6 or
                                  (p >= -capture_p and _poly3(coeffs, phi) > 0.0)):
            return OUTCOME_TURNBACK
    return OUTCOME_UNDECIDED


@njit(cache=True)
def shoot_trace(coeffs, c, phi0, p0, h, xi_max, stop_phi, out_xi, out_phi, out_p):
    """Record the trajectory until phi < stop_phi / turnback / span end.

    Returns the number of recorded samples (including the launch state).
    """
    n_cap = out_xi.shape[0]
    phi = phi0
    p = p0
    xi = 0.0
    out_xi[0] = xi
    out_phi[0] = phi
    out_p[0] = p
    n = 1
    while xi < xi_max and n < n_cap:
        phi_new, p_new = _rk4_step(coeffs, c, phi, p, h)
        xi += h
        if p_new >= 0.0 or phi_new <= stop_phi:
            break
        phi, p = phi_new, p_new
        out_xi[n] = xi
        out_phi[n] = phi
        out_p[n] = p
        n += 1
    return n


def warmup():
    """Trigger JIT compilation with a trivial call."""
    coeffs = np.array([-1.0, 1.3, -0.3, 0.0])
    shoot_classify(coeffs, 0.3, 1.0 - 1e-8, -1e-8, 0.01, 1.0, 1e-14, 1e-4)
    buf = np.zeros(8)
    shoot_trace(coeffs, 0.3, 1.0 - 1e-8, -1e-8, 0.01, 0.05, 1e-7,
                buf.copy(), buf.copy(), buf.copy())
    u = np.linspace(1.0, 0.0, 7)
    one = np.ones(2)
    fac = np.full(5, 1.5)
    imex_cubic_block(u, one, 0.3 * one, one, 0.3 * one,
                     0.5, 0.01, 0.02, fac.copy(), fac.copy(), np.zeros(5))

@njit(cache=True)
def imex_cubic_block(u, a_pred, b_pred, a_mid, b_mid, r, dt, dx2,
                     cp, dp, rhs):
    """Advance a block of IMEX Crank-Nicolson steps for the cubic reaction.

    u holds the full grid including Dirichlet endpoints and is updated in
    place; cp/dp are the precomputed Thomas factors of (I - r/2 L); rhs is
    interior-sized scratch.  One entry of a_pred/... per substep.
    """
    n = u.shape[0]
    m = n - 2
    for j in range(a_pred.shape[0]):
        ap = a_pred[j]
        bp = b_pred[j]
        am = a_mid[j]
        bm = b_mid[j]
        for i in range(1, n - 1):
            lap = (u[i - 1] - 2.0 * u[i] + u[i + 1]) / dx2
            f0 = ap * u[i] * (u[i] - bp) * (1.0 - u[i])
            uh = u[i] + 0.5 * dt * (lap + f0)
            fm = am * uh * (uh - bm) * (1.0 - uh)
            rhs[i - 1] = ((1.0 - r) * u[i]
                          + 0.5 * r * (u[i - 1] + u[i + 1]) + dt * fm)
        rhs[0] += 0.5 * r * u[0]
        rhs[m - 1] += 0.5 * r * u[n - 1]
        # Thomas solve with precomputed factors
        rhs[0] = rhs[0] / dp[0]
        for i in range(1, m):
            rhs[i] = (rhs[i] + 0.5 * r * rhs[i - 1]) / dp[i]
        u[m] = rhs[m - 1]
        for i in range(m - 2, -1, -1):
            rhs[i] = rhs[i] + cp[i] * rhs[i + 1]
            u[i + 1] = rhs[i]
