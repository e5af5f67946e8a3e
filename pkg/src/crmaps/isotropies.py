"""Isotropy groups of (H^2, 0) and (H^3_eps, 0), their action on maps, translations.

Source isotropy, gamma = (lam, r, u, c):
    sigma(z, w) = (lam u (z + c w), lam^2 w) / (1 - 2i conj(c) z + (r - i|c|^2) w)
Target isotropy, gamma' = (lam', r', u', a', c', sigma):
    sigma'(z', w') = (lam' U' (z' + c' w'), sigma lam'^2 w') / den'
    den' = 1 - 2i (conj(c1') z1' + eps conj(c2') z2') + (r' - i(|c1'|^2 + eps |c2'|^2)) w'
    U'   = [[u' a1', -eps u' a2'], [conj(a2'), conj(a1')]],  |a1'|^2 + eps |a2'|^2 = sigma

Every sigma factors as a "dilation" (lam u z, lam^2 w) after a Heisenberg-type
piece P_{c,r}; inverses are obtained by conjugating P_{-c,-r} through the
dilation.  Parameter fields may be numpy arrays: all jet-level functions are
vectorized over a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import CPoly, Jet, RationalMapGerm, compose_jet, rational_compose
from .errors import ConstraintViolated, NotOnHypersurface, SelfCheckFailed
from .hypersurfaces import SourcePoint, check_eps, sample_source_points, source_residual, target_residual

UNIT_TOL = 1e-12


def _cx(v) -> complex:
    # JSON complex: [re, im] or a plain real number
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


def _check_keys(d: dict, allowed: set) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown isotropy keys: {sorted(unknown)}")


@dataclass(frozen=True)
class GammaParams:
    lam: float = 1.0
    r: float = 0.0
    u: complex = 1.0
    c: complex = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.lam) <= 0):
            raise ConstraintViolated("lambda must be positive")
        if np.any(np.abs(np.abs(self.u) - 1) > UNIT_TOL):
            raise ConstraintViolated("u must have unit modulus")

    def to_json(self) -> dict:
        u, c = complex(self.u), complex(self.c)
        return {"lambda": float(self.lam), "r": float(self.r), "u": [u.real, u.imag], "c": [c.real, c.imag]}

    @classmethod
    def from_json(cls, d: dict) -> "GammaParams":
        _check_keys(d, {"lambda", "r", "u", "c"})
        return cls(float(d.get("lambda", 1.0)), float(d.get("r", 0.0)),
                   _cx(d.get("u", 1.0)), _cx(d.get("c", 0.0)))


@dataclass(frozen=True)
class GammaPrimeParams:
    lam: float = 1.0
    r: float = 0.0
    u: complex = 1.0
    a1: complex = 1.0
    a2: complex = 0.0
    c1: complex = 0.0
    c2: complex = 0.0
    sigma: int = 1

    def __post_init__(self):
        if np.any(np.asarray(self.lam) <= 0):
            raise ConstraintViolated("lambda' must be positive")
        if np.any(np.abs(np.abs(self.u) - 1) > UNIT_TOL):
            raise ConstraintViolated("u' must have unit modulus")
        if self.sigma not in (1, -1):
            raise ConstraintViolated("sigma_sign must be +1 or -1")

    @property
    def a(self):
        return (self.a1, self.a2)

    @property
    def c_p(self):
        return (self.c1, self.c2)

    def check(self, eps) -> "GammaPrimeParams":
        eps = check_eps(eps)
        if eps == 1 and self.sigma != 1:
            raise ConstraintViolated("sigma_sign must be +1 when eps = +1")
        lhs = np.abs(self.a1) ** 2 + eps * np.abs(self.a2) ** 2
        scale = 1 + np.abs(self.a1) ** 2 + np.abs(self.a2) ** 2
        if np.any(np.abs(lhs - self.sigma) > UNIT_TOL * scale):
            raise ConstraintViolated("a' does not lie on S^2_{eps,sigma}")
        return self

    def matrix(self, eps) -> np.ndarray:
        """U' as an array of shape batch + (2, 2)."""
        u, a1, a2 = (np.asarray(x, dtype=complex) for x in (self.u, self.a1, self.a2))
        return np.stack([np.stack([u * a1, -eps * u * a2], -1),
                         np.stack([np.conj(a2), np.conj(a1)], -1)], -2)

    def to_json(self) -> dict:
        cx = lambda x: [complex(x).real, complex(x).imag]  # noqa: E731
        return {"lambda": float(self.lam), "r": float(self.r), "u": cx(self.u),
                "a": [cx(self.a1), cx(self.a2)], "c_p": [cx(self.c1), cx(self.c2)],
                "sigma_sign": int(self.sigma)}

    @classmethod
    def from_json(cls, d: dict) -> "GammaPrimeParams":
        _check_keys(d, {"lambda", "r", "u", "a", "c_p", "sigma_sign"})
        a = d.get("a", [1.0, 0.0])
        c = d.get("c_p", [0.0, 0.0])
        if len(a) != 2 or len(c) != 2:
            raise ValueError("'a' and 'c_p' must each hold two complex values")
        return cls(float(d.get("lambda", 1.0)), float(d.get("r", 0.0)), _cx(d.get("u", 1.0)),
                   _cx(a[0]), _cx(a[1]), _cx(c[0]), _cx(c[1]), int(d.get("sigma_sign", 1)))


TRIVIAL = GammaParams()
TRIVIAL_PRIME = GammaPrimeParams()


# --------------------------------------------------------------------------
# maps
# --------------------------------------------------------------------------

def sigma_map(g: GammaParams) -> RationalMapGerm:
    z, w = CPoly.variables(2)
    lam, r, u, c = float(g.lam), float(g.r), complex(g.u), complex(g.c)
    den = 1 - 2j * c.conjugate() * z + (r - 1j * abs(c) ** 2) * w
    return RationalMapGerm.from_polys([lam * u * (z + c * w), lam ** 2 * w], den)


def sigma_prime_map(gp: GammaPrimeParams, eps) -> RationalMapGerm:
    eps = check_eps(eps)
    gp.check(eps)
    z1, z2, w = CPoly.variables(3)
    U = gp.matrix(eps)
    lam, r = float(gp.lam), float(gp.r)
    c1, c2 = complex(gp.c1), complex(gp.c2)
    v1, v2 = z1 + c1 * w, z2 + c2 * w
    den = 1 - 2j * (c1.conjugate() * z1 + eps * c2.conjugate() * z2) + (r - 1j * (abs(c1) ** 2 + eps * abs(c2) ** 2)) * w
    nums = [lam * (U[0, 0] * v1 + U[0, 1] * v2), lam * (U[1, 0] * v1 + U[1, 1] * v2), gp.sigma * lam ** 2 * w]
    return RationalMapGerm.from_polys(nums, den)


def sigma_jets(g: GammaParams, inputs) -> list[Jet]:
    """sigma_gamma applied to jets (z, w); vectorized over parameter arrays."""
    z, w = inputs
    lam, r, u, c = (np.asarray(x) for x in (g.lam, g.r, g.u, g.c))
    den = 1 - z * (2j * np.conj(c)) + w * (r - 1j * np.abs(c) ** 2)
    inv = den.reciprocal()
    return [(z + w * c) * (lam * u) * inv, w * lam ** 2 * inv]


def sigma_prime_jets(gp: GammaPrimeParams, eps, inputs) -> list[Jet]:
    """sigma'_gamma' applied to jets (z1', z2', w'); vectorized."""
    z1, z2, w = inputs
    U = gp.matrix(eps)
    lam, r, c1, c2 = (np.asarray(x) for x in (gp.lam, gp.r, gp.c1, gp.c2))
    v1, v2 = z1 + w * c1, z2 + w * c2
    den = (1 - z1 * (2j * np.conj(c1)) - z2 * (2j * eps * np.conj(c2))
           + w * (r - 1j * (np.abs(c1) ** 2 + eps * np.abs(c2) ** 2)))
    inv = den.reciprocal()
    return [(v1 * U[..., 0, 0] + v2 * U[..., 0, 1]) * lam * inv,
            (v1 * U[..., 1, 0] + v2 * U[..., 1, 1]) * lam * inv,
            w * (gp.sigma * lam ** 2) * inv]


# --------------------------------------------------------------------------
# inverses and group law
# --------------------------------------------------------------------------

def invert_gamma(g: GammaParams) -> GammaParams:
    u = np.asarray(g.u, dtype=complex)
    return GammaParams(1 / np.asarray(g.lam), -np.asarray(g.r) / np.asarray(g.lam) ** 2,
                       np.conj(u), -u * np.asarray(g.c) / np.asarray(g.lam))


def invert_gamma_prime(gp: GammaPrimeParams, eps) -> GammaPrimeParams:
    eps = check_eps(eps)
    s = gp.sigma
    lam = np.asarray(gp.lam)
    U = gp.matrix(eps)
    c = np.stack([np.asarray(gp.c1, dtype=complex) * np.ones_like(lam), np.asarray(gp.c2, dtype=complex) * np.ones_like(lam)], -1)
    Uc = np.einsum("...ij,...j->...i", U, c)
    return GammaPrimeParams(1 / lam, -s * np.asarray(gp.r) / lam ** 2, np.conj(gp.u),
                            s * np.conj(gp.a1), -s * np.asarray(gp.u) * np.asarray(gp.a2),
                            -s * Uc[..., 0] / lam, -s * Uc[..., 1] / lam, s)


def extract_gamma(jets: list[Jet]) -> GammaParams:
    """Standard parameters of a source isotropy from its 2-jet."""
    f1, f2 = jets
    lu = f1.coeff((1, 0))
    lam = np.abs(lu)
    u = lu / lam
    c = f1.coeff((0, 1)) / lu
    r = np.real(-f2.coeff((0, 2)) / lam ** 2)
    return GammaParams(lam, r, u, c)


def extract_gamma_prime(jets: list[Jet], eps) -> GammaPrimeParams:
    """Standard parameters of a target isotropy from its 2-jet (3 variables)."""
    eps = check_eps(eps)
    f1, f2, g = jets
    b = g.coeff((0, 0, 1))
    sigma = 1 if np.all(np.real(b) > 0) else -1
    lam = np.sqrt(np.abs(b))
    M = np.stack([np.stack([f1.coeff((1, 0, 0)), f1.coeff((0, 1, 0))], -1),
                  np.stack([f2.coeff((1, 0, 0)), f2.coeff((0, 1, 0))], -1)], -2)
    U = M / np.asarray(lam)[..., None, None]
    a1 = np.conj(U[..., 1, 1])
    a2 = np.conj(U[..., 1, 0])
    u = np.where(np.abs(a1) >= np.abs(a2), U[..., 0, 0] / np.where(a1 == 0, 1, a1),
                 U[..., 0, 1] / np.where(a2 == 0, 1, -eps * a2))
    u = u / np.abs(u)
    fw = np.stack([f1.coeff((0, 0, 1)), f2.coeff((0, 0, 1))], -1)
    c = np.linalg.solve(U, fw[..., None])[..., 0] / np.asarray(lam)[..., None]
    r = np.real(-g.coeff((0, 0, 2)) / (sigma * lam ** 2))
    return GammaPrimeParams(lam, r, u, a1, a2, c[..., 0], c[..., 1], sigma)


def compose_gamma(a: GammaParams, b: GammaParams) -> GammaParams:
    """Parameters of sigma_a o sigma_b, read off the composed 2-jet."""
    return extract_gamma(sigma_jets(a, sigma_jets(b, Jet.identity(2, 2))))


def compose_gamma_prime(a: GammaPrimeParams, b: GammaPrimeParams, eps) -> GammaPrimeParams:
    return extract_gamma_prime(sigma_prime_jets(a, eps, sigma_prime_jets(b, eps, Jet.identity(3, 2))), eps)


# --------------------------------------------------------------------------
# charts (real coordinates)
# --------------------------------------------------------------------------
# gamma chart  (5):  lam, r, arg u, Re c, Im c
# gamma' chart (10): lam', r', arg u', arg a1', Re a2', Im a2', Re c1', Im c1', Re c2', Im c2'
#                    with |a1'| = sqrt(1 - eps |a2'|^2)  (sigma = +1 component)

def _stack(parts) -> np.ndarray:
    return np.stack(np.broadcast_arrays(*(np.asarray(p, dtype=float) for p in parts)), axis=-1)


def gamma_to_chart(g: GammaParams) -> np.ndarray:
    c = np.asarray(g.c, dtype=complex)
    return _stack([g.lam, g.r, np.angle(g.u), c.real, c.imag])


def gamma_from_chart(x) -> GammaParams:
    x = np.asarray(x, dtype=float)
    return GammaParams(x[..., 0], x[..., 1], np.exp(1j * x[..., 2]), x[..., 3] + 1j * x[..., 4])


def gamma_prime_to_chart(gp: GammaPrimeParams) -> np.ndarray:
    a2, c1, c2 = (np.asarray(x, dtype=complex) for x in (gp.a2, gp.c1, gp.c2))
    return _stack([gp.lam, gp.r, np.angle(gp.u), np.angle(gp.a1), a2.real, a2.imag,
                   c1.real, c1.imag, c2.real, c2.imag])


def gamma_prime_from_chart(x, eps) -> GammaPrimeParams:
    x = np.asarray(x, dtype=float)
    a2 = x[..., 4] + 1j * x[..., 5]
    mod2 = 1 - eps * np.abs(a2) ** 2
    if np.any(mod2 <= 0):
        raise ConstraintViolated("chart point outside the a1' chart domain (|a2'| >= 1 for eps = +1)")
    a1 = np.sqrt(mod2) * np.exp(1j * x[..., 3])
    return GammaPrimeParams(x[..., 0], x[..., 1], np.exp(1j * x[..., 2]), a1, a2,
                            x[..., 6] + 1j * x[..., 7], x[..., 8] + 1j * x[..., 9], 1)


def params_from_chart(x, eps) -> tuple[GammaParams, GammaPrimeParams]:
    x = np.asarray(x, dtype=float)
    return gamma_from_chart(x[..., :5]), gamma_prime_from_chart(x[..., 5:15], eps)


def params_to_chart(g: GammaParams, gp: GammaPrimeParams) -> np.ndarray:
    a, b = gamma_to_chart(g), gamma_prime_to_chart(gp)
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    return np.concatenate([np.broadcast_to(a, shape + (5,)), np.broadcast_to(b, shape + (10,))], axis=-1)


TRIVIAL_CHART = params_to_chart(TRIVIAL, TRIVIAL_PRIME)


def param_distance(g: GammaParams, gp: GammaPrimeParams) -> float:
    """Euclidean distance of the standard parameters to the trivial ones."""
    parts = [g.lam - 1, g.r, g.u - 1, g.c, gp.lam - 1, gp.r, gp.u - 1, gp.a1 - 1, gp.a2, gp.c1, gp.c2]
    return float(np.sqrt(sum(np.abs(np.asarray(p)) ** 2 for p in parts)))


# --------------------------------------------------------------------------
# the action N(phi, phi', H) = phi' o H o phi^{-1}
# --------------------------------------------------------------------------

def act(g: GammaParams, gp: GammaPrimeParams, H: RationalMapGerm, eps) -> RationalMapGerm:
    eps = check_eps(eps)
    inner = rational_compose(H, sigma_map(invert_gamma(g)))
    return rational_compose(sigma_prime_map(gp, eps), inner)


def act_jets(g: GammaParams, gp: GammaPrimeParams, H: RationalMapGerm, eps, order: int = 4,
             base: list[Jet] | None = None) -> list[Jet]:
    """Jets of phi' o H o phi^{-1} computed by truncated substitution.

    ``base`` optionally supplies precomputed jets of H; then only jets are
    composed (valid because phi^{-1} fixes the origin).
    """
    inner = sigma_jets(invert_gamma(g), Jet.identity(2, order))
    if base is None:
        mid = H.on_jets(inner)
    else:
        mid = [compose_jet(b, inner) for b in base]
    return sigma_prime_jets(gp, eps, mid)


# --------------------------------------------------------------------------
# Heisenberg translations
# --------------------------------------------------------------------------

_SELF_CHECK_SAMPLES = 200


def _check_translation(T: RationalMapGerm, residual, pts, what):
    vals = T(*pts)
    res = np.abs(residual(*vals))
    scale = 1 + sum(np.abs(v) ** 2 for v in vals)
    if not np.all(res / scale < 1e-12):
        raise SelfCheckFailed(f"{what}: residual {np.max(res):.3g}")
    return T


def source_translation(p: SourcePoint) -> RationalMapGerm:
    """Automorphism of H^2 taking 0 to p: (z + z0, w + w0 + 2i conj(z0) z)."""
    z, w = CPoly.variables(2)
    z0, w0 = p.coords
    T = RationalMapGerm.from_polys([z + z0, w + w0 + 2j * z0.conjugate() * z], CPoly.constant(1, 2))
    pts = sample_source_points(_SELF_CHECK_SAMPLES, 1.0, seed=7)
    return _check_translation(T, source_residual, pts, "source_translation")


def _target_points(eps, n, seed=7):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n))
    u = rng.normal(size=n)
    return a[0], a[1], u + 1j * (np.abs(a[0]) ** 2 + eps * np.abs(a[1]) ** 2)


def _check_target_point(q, eps):
    q1, q2, qw = (complex(x) for x in q)
    res = target_residual(eps, q1, q2, qw)
    if abs(res) > 1e-12 * (1 + abs(q1) ** 2 + abs(q2) ** 2 + abs(qw)):
        raise NotOnHypersurface(f"point {q} is off H^3_eps (residual {res:.3g})")
    return q1, q2, qw


def target_translation(q, eps) -> RationalMapGerm:
    """Automorphism of H^3_eps taking 0 to q."""
    eps = check_eps(eps)
    q1, q2, qw = _check_target_point(q, eps)
    z1, z2, w = CPoly.variables(3)
    herm = q1.conjugate() * z1 + eps * q2.conjugate() * z2
    T = RationalMapGerm.from_polys([z1 + q1, z2 + q2, w + qw + 2j * herm], CPoly.constant(1, 3))
    return _check_translation(T, lambda a, b, c: target_residual(eps, a, b, c), _target_points(eps, _SELF_CHECK_SAMPLES),
                              "target_translation")


def target_translation_inverse(q, eps) -> RationalMapGerm:
    """Automorphism of H^3_eps taking q to 0 (inverse of ``target_translation``)."""
    eps = check_eps(eps)
    q1, q2, qw = _check_target_point(q, eps)
    z1, z2, w = CPoly.variables(3)
    herm = q1.conjugate() * z1 + eps * q2.conjugate() * z2
    T = RationalMapGerm.from_polys([z1 - q1, z2 - q2, w - qw.conjugate() - 2j * herm], CPoly.constant(1, 3))
    return _check_translation(T, lambda a, b, c: target_residual(eps, a, b, c), _target_points(eps, _SELF_CHECK_SAMPLES),
                              "target_translation_inverse")


def recenter(H: RationalMapGerm, p: SourcePoint, eps, tol: float = 1e-9) -> RationalMapGerm:
    """The germ T_{H(p)}^{-1} o H o T_p at 0, equivalent to H at p under Aut."""
    eps = check_eps(eps)
    z0, w0 = p.coords
    q = H(z0, w0)
    res = target_residual(eps, *q)
    if not np.isfinite(res) or abs(res) > tol * (1 + sum(abs(x) ** 2 for x in q)):
        raise NotOnHypersurface(f"H(p) is off H^3_eps (residual {res:.3g})")
    q1, q2, qw = (complex(x) for x in q)
    qw = complex(qw.real, abs(q1) ** 2 + eps * abs(q2) ** 2)  # project roundoff onto H^3_eps
    inner = rational_compose(H, source_translation(p))
    return rational_compose(target_translation_inverse((q1, q2, qw), eps), inner)


SWAP = GammaPrimeParams(1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, -1)


def orient_transversal(H: RationalMapGerm, eps) -> RationalMapGerm:
    """Compose with the sigma = -1 isotropy (z2', z1', -w') when g_w(0) < 0.

    Only possible for eps = -1; for eps = +1 the map is returned unchanged.
    """
    eps = check_eps(eps)
    gw = complex(H.jets(1)[2].derivative((0, 1)))
    if eps == -1 and gw.real < 0:
        return rational_compose(sigma_prime_map(SWAP, eps), H)
    return H
