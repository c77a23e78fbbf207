"""Linearized stability of the discrete controlled system at (phi_e, s_e).

The quadratic approximation replaces beta(phi), V1(phi) and Veps(y) in the
controlled discrete Lagrangian by beta(0), 1/2 V1''(0) phi^2 and
1/2 Veps''(0) y^2, where y linearizes to x = s + x_slope * phi. Its discrete
energy on a step (q_k, q_{k+1}) is

    a_pp dphi^2 + a_ps dphi ds + a_ss ds^2 + b_phi phi_mid^2 + b_x x_mid^2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .controlled import Gains, control_impulse_u
from .mechanics import ConfigPoint, DEFAULT_NEWTON, simulate, step

ON_CIRCLE_TOL = 1e-8
INSIDE_MARGIN = 1e-10


class Definiteness(enum.Enum):
    NEGATIVE_DEFINITE = "NegativeDefinite"
    POSITIVE_DEFINITE = "PositiveDefinite"
    SEMIDEFINITE = "Semidefinite"
    INDEFINITE = "Indefinite"


class Classification(enum.Enum):
    SPECTRALLY_STABLE = "SpectrallyStable"
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    UNSTABLE = "Unstable"


class SingularLeadingBlock(np.linalg.LinAlgError):
    pass


class EigenSolverFailure(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadraticEnergyForm:
    a_pp: float
    a_ps: float
    a_ss: float
    b_phi: float
    b_x: float
    x_slope: float
    h: float

    @classmethod
    def from_gains(cls, system, gains: Gains, h):
        ga, al = system.gamma, system.alpha
        sig, rho = gains.sigma, gains.rho
        b0 = system.beta(gains.phi_e)
        a_pp = (al * ga * sig ** 2 + b0 ** 2 * (sig - 1.0) * (rho * (sig - 1.0) - sig)) / (
            2.0 * ga * sig ** 2 * h)
        return cls(
            a_pp=a_pp,
            a_ps=b0 * rho * (sig - 1.0) / (sig * h),
            a_ss=ga * rho / (2.0 * h),
            b_phi=0.5 * h * system.ddV1(gains.phi_e),
            b_x=0.5 * h * gains.veps.second_derivative_at_0,
            x_slope=((rho - 1.0) / rho - 1.0 / sig) * b0 / ga,
            h=h,
        )

    def x(self, q):
        return q[1] + self.x_slope * q[0]

    def velocity_block(self):
        """Symmetric 2x2 matrix of the (dphi, ds) part."""
        return np.array([[self.a_pp, 0.5 * self.a_ps], [0.5 * self.a_ps, self.a_ss]])

    def mass_over_h(self):
        return 2.0 * self.velocity_block()

    def stiffness_half_h(self):
        """(h/2) times the potential Hessian in (phi, s) coordinates."""
        e = np.array([self.x_slope, 1.0])
        return np.array([[self.b_phi, 0.0], [0.0, 0.0]]) + self.b_x * np.outer(e, e)


def quadratic_energy(form: QuadraticEnergyForm, q_k, q_k1):
    dphi = q_k1[0] - q_k[0]
    ds = q_k1[1] - q_k[1]
    phi_mid = 0.5 * (q_k[0] + q_k1[0])
    x_mid = 0.5 * (form.x(q_k) + form.x(q_k1))
    return (form.a_pp * dphi * dphi + form.a_ps * dphi * ds + form.a_ss * ds * ds
            + form.b_phi * phi_mid * phi_mid + form.b_x * x_mid * x_mid)


def energy_sequence(form, q):
    q = np.asarray(q)
    return np.array([quadratic_energy(form, q[k], q[k + 1]) for k in range(len(q) - 1)])


def energy_definiteness(form: QuadraticEnergyForm) -> Definiteness:
    # the form is block diagonal in (dphi, ds | phi_mid | x_mid)
    det = form.a_pp * form.a_ss - 0.25 * form.a_ps ** 2
    diag = [form.b_phi, form.b_x]
    if det > 0.0 and form.a_pp < 0.0 and all(b < 0.0 for b in diag):
        return Definiteness.NEGATIVE_DEFINITE
    if det > 0.0 and form.a_pp > 0.0 and all(b > 0.0 for b in diag):
        return Definiteness.POSITIVE_DEFINITE
    signs = set()
    if det < 0.0:
        signs.update((-1, 1))
    elif det > 0.0:
        signs.add(1 if form.a_pp > 0.0 else -1)
    else:
        signs.add(1 if form.a_pp + form.a_ss > 0.0 else -1)
    signs.update(1 if b > 0.0 else -1 for b in diag if b != 0.0)
    return Definiteness.INDEFINITE if len(signs) > 1 else Definiteness.SEMIDEFINITE


@dataclass(frozen=True)
class GainConditions:
    sigma_lower: float
    holds: dict
    margins: dict

    @property
    def all_hold(self):
        return all(self.holds.values())

    def violated(self):
        return [name for name, ok in self.holds.items() if not ok]


def check_gain_conditions(system, gains: Gains) -> GainConditions:
    """Evaluate -b0^2/(alpha gamma - b0^2) < sigma < 0, rho < 0, Veps''(0) < 0.

    Margins are positive when the inequality holds.
    """
    b0 = system.beta(gains.phi_e)
    lower = -b0 ** 2 / (system.alpha * system.gamma - b0 ** 2)
    c = gains.veps.second_derivative_at_0
    margins = {
        "sigma > lower": gains.sigma - lower,
        "sigma < 0": -gains.sigma,
        "rho < 0": -gains.rho,
        "Veps''(0) < 0": -c,
    }
    return GainConditions(lower, {k: v > 0.0 for k, v in margins.items()}, margins)


def _damping_direction(form):
    return np.array([form.x_slope, 1.0])


def recurrence_blocks(system, gains: Gains, h, D=None):
    """Blocks of ``A2 z_{k+1} + A1 z_k + A0 z_{k-1} = 0`` for z = (phi, s)."""
    D = gains.D if D is None else D
    form = QuadraticEnergyForm.from_gains(system, gains, h)
    m = form.mass_over_h()
    kq = 0.5 * form.stiffness_half_h()  # (h/4) K
    e = _damping_direction(form)
    damp = (D / h) * np.outer(e, e)
    a2 = -m - kq + damp
    a1 = 2.0 * m - 2.0 * kq
    a0 = -m - kq - damp
    return a2, a1, a0


def linearized_update(system, gains: Gains, h, D=None):
    """4x4 companion matrix of (z_{k-1}, z_k) -> (z_k, z_{k+1})."""
    a2, a1, a0 = recurrence_blocks(system, gains, h, D)
    scale = np.abs(a2).max()
    if scale == 0.0 or abs(np.linalg.det(a2)) <= 1e-14 * scale ** 2:
        raise SingularLeadingBlock("leading block of the linearized recurrence is singular")
    inv = np.linalg.inv(a2)
    top = np.hstack([np.zeros((2, 2)), np.eye(2)])
    bottom = np.hstack([-inv @ a0, -inv @ a1])
    return np.vstack([top, bottom])


def characteristic_polynomial(matrix):
    """Monic characteristic polynomial coefficients (highest power first), Faddeev-LeVerrier."""
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(a @ m) / k)
    return np.array(coeffs)


def _polish(coeffs, root, iterations=3):
    deriv = np.polyder(coeffs)
    for _ in range(iterations):
        d = np.polyval(deriv, root)
        if d == 0:
            break
        root = root - np.polyval(coeffs, root) / d
    return root


def _merge_multiple(coeffs, roots, radius=1e-3, tol=1e-9):
    """Replace a cluster of computed roots by its mean when the mean is a multiple root.

    A root of multiplicity m is only resolved to about eps**(1/m) individually,
    but the cluster mean is accurate to roundoff. The merge is accepted only if
    the first m-1 derivatives of the polynomial vanish at the mean.
    """
    roots = list(roots)
    scale = np.abs(coeffs).sum()
    out = []
    while roots:
        seed = roots.pop(0)
        cluster = [seed] + [r for r in roots if abs(r - seed) <= radius * max(1.0, abs(seed))]
        for r in cluster[1:]:
            roots.remove(r)
        if len(cluster) == 1:
            out.append(_polish(coeffs, seed))
            continue
        mean = np.mean(cluster)
        if abs(mean.imag) <= radius * max(1.0, abs(mean)) and all(abs(r.imag) <= radius for r in cluster):
            mean = complex(mean.real, 0.0)
        deriv = np.array(coeffs, dtype=complex)
        ok = True
        for j in range(len(cluster)):
            if abs(np.polyval(deriv, mean)) > tol * scale * math.factorial(j):
                ok = False
                break
            deriv = np.polyder(deriv)
        out.extend([mean] * len(cluster) if ok else [_polish(coeffs, r) for r in cluster])
    return np.array(out, dtype=complex)


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    spectral_radius: float
    classification: Classification
    determinant_residuals: np.ndarray = field(repr=False)
    condition_margins: dict = field(default_factory=dict)

    @property
    def moduli(self):
        return np.abs(self.eigenvalues)


def classify(radius, D):
    if radius > 1.0 + ON_CIRCLE_TOL:
        return Classification.UNSTABLE
    if radius < 1.0 - INSIDE_MARGIN:
        return Classification.ASYMPTOTICALLY_STABLE
    return Classification.SPECTRALLY_STABLE


def spectrum(matrix, D=0.0, tol=1e-9, condition_margins=None) -> SpectralReport:
    """Eigenvalues from the characteristic quartic, certified by det(M - lambda I)."""
    a = np.asarray(matrix, dtype=float)
    if a.shape != (4, 4):
        raise ValueError("expected a 4x4 matrix")
    coeffs = characteristic_polynomial(a)
    roots = _merge_multiple(coeffs, np.roots(coeffs))
    scale = max(1.0, np.linalg.norm(a, 2)) ** 4
    residuals = np.array([abs(np.linalg.det(a - lam * np.eye(4))) for lam in roots])
    if len(roots) != 4 or not np.all(residuals <= tol * scale):
        raise EigenSolverFailure(f"eigenvalue residuals {residuals} exceed {tol * scale:g}")
    order = np.lexsort((roots.imag, -np.abs(roots)))
    roots = roots[order]
    radius = float(np.max(np.abs(roots)))
    return SpectralReport(roots, radius, classify(radius, D), residuals[order],
                          dict(condition_margins or {}))


def stability_analysis(system, gains: Gains, h, D=None) -> SpectralReport:
    D = gains.D if D is None else D
    report = spectrum(linearized_update(system, gains, h, D), D)
    report.condition_margins = check_gain_conditions(system, gains).margins
    return report


def iterate_linear(matrix, z0, z1, steps):
    """Apply the companion matrix; returns (steps + 1, 2) configurations."""
    out = np.empty((steps + 1, 2))
    out[0], out[1] = z0, z1
    state = np.concatenate([z0, z1])
    for k in range(2, steps + 1):
        state = matrix @ state
        out[k] = state[2:]
    return out


class QuadraticControlledLagrangian:
    """Quadratic approximation of the controlled Lagrangian at the equilibrium."""

    def __init__(self, system, gains: Gains, h):
        self.form = QuadraticEnergyForm.from_gains(system, gains, h)
        # the form stores M/(2h) and (h/2) V''; undo the h scaling
        self.mass = self.form.mass_over_h() * h
        self.hessian = self.form.stiffness_half_h() * (2.0 / h)

    def value(self, phi, s, phidot, sdot):
        v = np.array([phidot, sdot])
        q = np.array([phi, s])
        return 0.5 * v @ self.mass @ v - 0.5 * q @ self.hessian @ q

    def partials(self, phi, s, phidot, sdot):
        m, k = self.mass, self.hessian
        return (
            -(k[0, 0] * phi + k[0, 1] * s),
            -(k[1, 0] * phi + k[1, 1] * s),
            m[0, 0] * phidot + m[0, 1] * sdot,
            m[1, 0] * phidot + m[1, 1] * sdot,
        )


def simulate_linearized(system, gains: Gains, h, z0, z1, steps, D=None, settings=DEFAULT_NEWTON):
    """Newton-integrate the quadratic controlled Lagrangian with the linear damping term."""
    D = gains.D if D is None else D
    model = QuadraticControlledLagrangian(system, gains, h)
    slope = model.form.x_slope

    def impulse(q_prev, q_cur, q_next):
        # right-hand side -D (x_{k+1} - x_{k-1}) / h * (x_slope, 1), moved to the left
        dx = (q_next[1] - q_prev[1]) + slope * (q_next[0] - q_prev[0])
        f = D * dx / h
        return slope * f, f
    return simulate(model, z0, z1, h, steps, impulse, settings)


def energy_balance_residual(system, gains: Gains, h, D, trajectory, factor=0.5):
    """Residual of E_{k,k+1} - E_{k-1,k} = factor * D h (dx_{k-1}/h + dx_k/h)^2.

    ``factor = 0.5`` is the value produced by the linearized damped equations;
    the published statement of the identity uses 0.25.
    """
    q = np.asarray(getattr(trajectory, "q", trajectory))
    form = QuadraticEnergyForm.from_gains(system, gains, h)
    energies = energy_sequence(form, q)
    x = q[:, 1] + form.x_slope * q[:, 0]
    rate = (x[2:] - x[:-2]) / h
    return energies[1:] - energies[:-1] - factor * D * h * rate ** 2


def nonlinear_update_jacobian(system, gains: Gains, h, eps=1e-4, settings=DEFAULT_NEWTON):
    """Central-difference Jacobian of the nonlinear closed-loop update at the equilibrium."""
    eq = np.array([gains.phi_e, gains.s_e])
    base = np.concatenate([eq, eq])

    def impulse(q_prev, q_cur, q_next):
        return 0.0, -control_impulse_u(system, gains, q_prev, q_cur, q_next, h)

    def update(state):
        q_prev, q_cur = ConfigPoint(*state[:2]), ConfigPoint(*state[2:])
        nxt = step(system, q_prev, q_cur, h, impulse, settings).q
        return np.concatenate([state[2:], nxt])

    jac = np.empty((4, 4))
    for j in range(4):
        d = np.zeros(4)
        d[j] = eps
        jac[:, j] = (update(base + d) - update(base - d)) / (2.0 * eps)
    return jac
