"""Source/target hyperquadrics, membership residuals, Cayley transforms, F^2 test.

Source:  H^2      = {Im w = |z|^2}                       in C^2
Target:  H^3_eps  = {Im w' = |z1'|^2 + eps |z2'|^2}      in C^3
Sphere models:  S^2 = {|Z|^2 + |W|^2 = 1},  Q_eps = {|Z1|^2 + |Z2|^2 + eps |Z3|^2 = 1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import CPoly, Jet, RationalMapGerm, compose_jet, rational_compose
from .errors import DenominatorVanishes, InvalidSignature, OrderExceeded, SelfCheckFailed

DEFAULT_SEED = 42
TOL_ND = 1e-9
TOL_TV = 1e-9


def check_eps(eps) -> int:
    e = int(eps)
    if e not in (1, -1) or e != eps:
        raise InvalidSignature(f"signature must be +1 or -1, got {eps!r}")
    return e


@dataclass(frozen=True)
class SourcePoint:
    """Point (z, u + i|z|^2) of H^2; lies on the hypersurface by construction."""

    z: complex
    u: float

    @property
    def w(self) -> complex:
        return complex(self.u, np.abs(self.z) ** 2)

    @property
    def coords(self) -> tuple[complex, complex]:
        return complex(self.z), self.w


def source_residual(z, w):
    return np.imag(w) - np.abs(z) ** 2


def target_residual(eps, z1, z2, w):
    return np.imag(w) - np.abs(z1) ** 2 - eps * np.abs(z2) ** 2


def sample_source_points(n: int, radius: float, seed: int = DEFAULT_SEED):
    """Seeded samples with |z| <= radius and |u| <= radius, as arrays (z, w)."""
    rng = np.random.default_rng(seed)
    rho = radius * np.sqrt(rng.random(n))
    theta = rng.uniform(0, 2 * np.pi, n)
    z = rho * np.exp(1j * theta)
    u = rng.uniform(-radius, radius, n)
    return z, u + 1j * np.abs(z) ** 2


@dataclass
class MembershipReport:
    max_residual: float
    passed: bool
    n_evaluated: int
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"max_residual": self.max_residual, "pass": self.passed,
                "n_evaluated": self.n_evaluated, "failures": self.failures}


def _evaluate_skipping_poles(H: RationalMapGerm, pts, den_tol: float = 1e-10):
    dens = np.stack([np.abs(np.broadcast_to(c.den(*pts), pts[0].shape)) for c in H.components])
    ok = np.all(dens > den_tol, axis=0)
    vals = [np.broadcast_to(c.num(*pts), pts[0].shape)[ok] / np.broadcast_to(c.den(*pts), pts[0].shape)[ok]
            for c in H.components]
    return ok, vals


def maps_hypersurface(H: RationalMapGerm, eps, n: int = 1000, radius: float = 0.1,
                      tol: float = 1e-10, seed: int = DEFAULT_SEED) -> MembershipReport:
    """Maximum |target residual| of H over seeded points of H^2 near 0."""
    eps = check_eps(eps)
    if not H.holomorphic_at_origin():
        raise DenominatorVanishes("map is not holomorphic at the origin")
    z, w = sample_source_points(n, radius, seed)
    ok, (f1, f2, g) = _evaluate_skipping_poles(H, (z, w))
    res = np.abs(target_residual(eps, f1, f2, g))
    failures = [{"index": int(i), "z": [z[i].real, z[i].imag], "u": float(w[i].real),
                 "reason": "DenominatorVanishes"} for i in np.flatnonzero(~ok)]
    mx = float(res.max()) if res.size else float("nan")
    return MembershipReport(mx, bool(res.size and mx <= tol), int(ok.sum()), failures)


FORMAL_MAX_ORDER = 6


def formal_membership(H: RationalMapGerm, eps, order: int = 4) -> float:
    """Largest coefficient of Im g - |f1|^2 - eps|f2|^2 along w = u + i z zbar,
    expanded to total order ``order`` in the independent variables (z, zbar, u).

    Slow exact-order alternative to the sampled test.
    """
    eps = check_eps(eps)
    if not 1 <= order <= FORMAL_MAX_ORDER:
        raise OrderExceeded(f"formal check supports orders 1..{FORMAL_MAX_ORDER}")
    z, zb, u = Jet.identity(3, order)
    f1, f2, g = H.jets(order)
    inner = [z, u + 1j * z * zb]
    inner_bar = [zb, u - 1j * z * zb]
    F1, F2, Gm = (compose_jet(j, inner) for j in (f1, f2, g))
    F1b, F2b, Gb = (compose_jet(j.conj_coeffs(), inner_bar) for j in (f1, f2, g))
    res = (Gm - Gb) * (-0.5j) - F1 * F1b - F2 * F2b * eps
    return float(np.max(np.abs(res.c)))


def sample_sphere_points(n: int, seed: int = DEFAULT_SEED):
    """Seeded uniform samples of the unit sphere in C^2."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v[:, 0] + 1j * v[:, 1], v[:, 2] + 1j * v[:, 3]


def sphere_model_residual(eps, Z1, Z2, Z3):
    return np.abs(Z1) ** 2 + np.abs(Z2) ** 2 + eps * np.abs(Z3) ** 2 - 1.0


def maps_sphere_model(H: RationalMapGerm, eps, n: int = 1000, tol: float = 1e-10,
                      seed: int = DEFAULT_SEED, den_tol: float = 1e-3) -> MembershipReport:
    """Residual check S^2 -> Q_eps for the sphere-model maps, skipping poles."""
    eps = check_eps(eps)
    Z, W = sample_sphere_points(n, seed)
    ok, vals = _evaluate_skipping_poles(H, (Z, W), den_tol)
    res = np.abs(sphere_model_residual(eps, *vals))
    failures = [{"index": int(i), "reason": "DenominatorVanishes"} for i in np.flatnonzero(~ok)]
    mx = float(res.max()) if res.size else float("nan")
    return MembershipReport(mx, bool(res.size and mx <= tol), int(ok.sum()), failures)


@dataclass
class F2Diagnostics:
    in_F2: bool
    fixes_origin: bool
    nondegeneracy: complex
    g_w: complex
    membership: MembershipReport
    reasons: list

    def to_json(self) -> dict:
        return {"in_F2": self.in_F2, "fixes_origin": self.fixes_origin,
                "nondegeneracy": [self.nondegeneracy.real, self.nondegeneracy.imag],
                "g_w": [self.g_w.real, self.g_w.imag],
                "membership": self.membership.to_json(), "reasons": self.reasons}


def is_in_F2(H: RationalMapGerm, eps, tol_nd: float = TOL_ND, tol_tv: float = TOL_TV,
             n: int = 1000, radius: float = 0.1, tol: float = 1e-10,
             seed: int = DEFAULT_SEED) -> F2Diagnostics:
    eps = check_eps(eps)
    f1, f2, g = H.jets(2)
    origin = max(abs(f1.coeff((0, 0))), abs(f2.coeff((0, 0))), abs(g.coeff((0, 0))))
    det = complex(f1.derivative((1, 0)) * f2.derivative((2, 0)) - f2.derivative((1, 0)) * f1.derivative((2, 0)))
    gw = complex(g.derivative((0, 1)))
    memb = maps_hypersurface(H, eps, n=n, radius=radius, tol=tol, seed=seed)
    reasons = []
    if origin > tol:
        reasons.append("H(0) != 0")
    if abs(det) <= tol_nd:
        reasons.append("2-nondegeneracy determinant vanishes")
    if not (gw.real > tol_tv and abs(gw.imag) < tol_nd):
        reasons.append("g_w(0) is not real positive")
    if not memb.passed:
        reasons.append("does not map H^2 into H^3_eps")
    return F2Diagnostics(not reasons, origin <= tol, det, gw, memb, reasons)


# --------------------------------------------------------------------------
# Cayley transforms
# --------------------------------------------------------------------------
# Source: (Z, W) in S^2 -> (iZ/(1+W), i(1-W)/(1+W)) in H^2, base point (0, 1) -> 0.
# Target: (Z1, Z2, Z3) in Q_eps -> (iZ1/(1+Z2), iZ3/(1+Z2), i(1-Z2)/(1+Z2)),
#         base point (0, 1, 0) -> 0; the eps-weighted sphere coordinate Z3 becomes z2'.

_CAYLEY_SAMPLES = 500


def _self_check(C: RationalMapGerm, pts, residual, what: str):
    ok, vals = _evaluate_skipping_poles(C, pts, 1e-6)
    res = np.abs(residual(*vals))
    scale = 1.0 + sum(np.abs(v) ** 2 for v in vals)
    if not np.all(res / scale < 1e-10):
        raise SelfCheckFailed(f"{what}: residual {res.max():.3g} exceeds 1e-10")
    return C


def cayley_source() -> RationalMapGerm:
    """Sphere model S^2 -> Heisenberg model H^2."""
    Z, W = CPoly.variables(2)
    C = RationalMapGerm.from_polys([1j * Z, 1j * (1 - W)], 1 + W)
    return _self_check(C, sample_sphere_points(_CAYLEY_SAMPLES), source_residual, "cayley_source")


def cayley_source_inverse() -> RationalMapGerm:
    """Heisenberg model H^2 -> sphere model S^2."""
    z, w = CPoly.variables(2)
    C = RationalMapGerm.from_polys([2 * z, 1j - w], 1j + w)
    pts = sample_source_points(_CAYLEY_SAMPLES, 2.0)
    return _self_check(C, pts, lambda a, b: np.abs(a) ** 2 + np.abs(b) ** 2 - 1, "cayley_source_inverse")


def sample_quadric_points(eps, n: int, seed: int = DEFAULT_SEED):
    rng = np.random.default_rng(seed)
    Z3 = rng.normal(size=n) + 1j * rng.normal(size=n)
    v = rng.normal(size=(n, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if eps == 1:
        Z3 = Z3 * 0.5
        rad = np.sqrt(np.maximum(1 - np.abs(Z3) ** 2, 0))
    else:
        rad = np.sqrt(1 + np.abs(Z3) ** 2)
    return rad * (v[:, 0] + 1j * v[:, 1]), rad * (v[:, 2] + 1j * v[:, 3]), Z3


def cayley_target(eps) -> RationalMapGerm:
    """Sphere model Q_eps -> Heisenberg model H^3_eps."""
    eps = check_eps(eps)
    Z1, Z2, Z3 = CPoly.variables(3)
    C = RationalMapGerm.from_polys([1j * Z1, 1j * Z3, 1j * (1 - Z2)], 1 + Z2)
    pts = sample_quadric_points(eps, _CAYLEY_SAMPLES)
    pts = tuple(p[np.abs(np.abs(pts[0]) ** 2 + np.abs(pts[1]) ** 2 + eps * np.abs(pts[2]) ** 2 - 1) < 1e-9]
                for p in pts)
    return _self_check(C, pts, lambda a, b, c: target_residual(eps, a, b, c), "cayley_target")


def cayley_target_inverse(eps) -> RationalMapGerm:
    """Heisenberg model H^3_eps -> sphere model Q_eps."""
    eps = check_eps(eps)
    z1, z2, w = CPoly.variables(3)
    C = RationalMapGerm.from_polys([2 * z1, 1j - w, 2 * z2], 1j + w)
    rng = np.random.default_rng(DEFAULT_SEED)
    a = rng.normal(size=(2, _CAYLEY_SAMPLES)) + 1j * rng.normal(size=(2, _CAYLEY_SAMPLES))
    u = rng.normal(size=_CAYLEY_SAMPLES)
    pts = (a[0], a[1], u + 1j * (np.abs(a[0]) ** 2 + eps * np.abs(a[1]) ** 2))
    return _self_check(C, pts, lambda A, B, D: sphere_model_residual(eps, A, B, D), "cayley_target_inverse")


def sphere_to_heisenberg(H_sphere: RationalMapGerm, eps) -> RationalMapGerm:
    """Conjugate a sphere-model map S^2 -> Q_eps to a map H^2 -> H^3_eps.

    The result is generally not holomorphic at 0; recenter it at a base point
    (``isotropies.recenter``) to obtain a germ in F^2.
    """
    eps = check_eps(eps)
    inner = rational_compose(H_sphere, cayley_source_inverse(), check=False)
    return rational_compose(cayley_target(eps), inner, check=False)
