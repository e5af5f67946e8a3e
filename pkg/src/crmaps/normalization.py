"""Bringing a map of F^2 to normal form and reading off its class.

The seven normal-form conditions on Ĥ = sigma' o H o sigma^{-1} are

    (i)   Ĥ_z(0) = (1, 0, 0)        (ii)  Ĥ_w(0) = (0, 0, 1)
    (iii) f2_{z^2}(0) = 2           (iv)  f2_{zw}(0) = 0
    (v)   f1_{w^2}(0) real, >= 0    (vi)  Re g_{w^2}(0) = 0
    (vii) Re f2_{z^2 w}(0) = 0

i.e. 19 real equations for the 15 real isotropy parameters.  ``normalize``
first eliminates them order by order in closed form (stage A), then polishes
all parameters together by Levenberg-Marquardt (stage B).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import Jet, RationalMapGerm, real_jacobian
from .catalog import NormalFormID, jet_coordinates, jet_distance, normal_form_map
from .errors import NoConvergence, NotInF2, Unclassifiable
from .hypersurfaces import check_eps, is_in_F2
from .isotropies import (
    TRIVIAL, TRIVIAL_PRIME, GammaParams, GammaPrimeParams, act, act_jets,
    compose_gamma, compose_gamma_prime, params_from_chart, params_to_chart,
)

CONDITION_NAMES = ("H_z", "H_w", "f2_z2", "f2_zw", "f1_w2", "g_w2", "f2_z2w")
WORK_ORDER = 3
TARGET_TOL = 1e-10
ACCEPT_TOL = 1e-8
MAX_ITER = 100
CLASSIFY_TOL = 1e-6
GAUGE_TOL = 1e-8


def _d(j: Jet, *e):
    return j.derivative(e)


def condition_vector(jets: list[Jet]) -> np.ndarray:
    """The 19 real condition residuals (batched over leading axes)."""
    f1, f2, g = jets
    parts = [
        _d(f1, 1, 0) - 1, _d(f2, 1, 0), _d(g, 1, 0),
        _d(f1, 0, 1), _d(f2, 0, 1), _d(g, 0, 1) - 1,
        _d(f2, 2, 0) - 2, _d(f2, 1, 1),
    ]
    parts = np.broadcast_arrays(*parts, _d(f1, 0, 2), _d(g, 0, 2), _d(f2, 2, 1))
    cplx = np.stack(parts[:8], -1)
    return np.concatenate([cplx.real, cplx.imag, np.stack([parts[8].imag, parts[9].real, parts[10].real], -1)], -1)


@dataclass
class ConditionReport:
    residuals: dict
    vector: np.ndarray
    sign_ok: bool

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    def passed(self, tol: float = ACCEPT_TOL) -> bool:
        return self.sign_ok and self.max_residual <= tol

    def to_json(self) -> dict:
        return {"residuals": self.residuals, "sign_ok": self.sign_ok, "max_residual": self.max_residual}


def verify_normal_conditions(H: RationalMapGerm | list[Jet], eps=None) -> ConditionReport:
    """Residual of each normal-form condition.  ``eps`` is accepted for API symmetry."""
    jets = H.jets(WORK_ORDER) if isinstance(H, RationalMapGerm) else H
    f1, f2, g = jets
    res = {
        "H_z": float(np.linalg.norm([_d(f1, 1, 0) - 1, _d(f2, 1, 0), _d(g, 1, 0)])),
        "H_w": float(np.linalg.norm([_d(f1, 0, 1), _d(f2, 0, 1), _d(g, 0, 1) - 1])),
        "f2_z2": float(abs(_d(f2, 2, 0) - 2)),
        "f2_zw": float(abs(_d(f2, 1, 1))),
        "f1_w2": float(abs(np.imag(_d(f1, 0, 2)))),
        "g_w2": float(abs(np.real(_d(g, 0, 2)))),
        "f2_z2w": float(abs(np.real(_d(f2, 2, 1)))),
    }
    return ConditionReport(res, condition_vector(jets), bool(np.real(_d(f1, 0, 2)) >= -1e-12))


@dataclass
class NormalizationResult:
    normalized: RationalMapGerm
    gamma: GammaParams
    gamma_p: GammaPrimeParams
    residuals: dict
    gauge_note: str = ""
    iterations: int = 0
    history: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"normalized": self.normalized.to_json(), "gamma": self.gamma.to_json(),
                "gamma_p": self.gamma_p.to_json(), "residuals": self.residuals,
                "gauge_note": self.gauge_note, "iterations": self.iterations}


# --------------------------------------------------------------------------
# stage A
# --------------------------------------------------------------------------

def _newton2(F, x0, tol=1e-13, max_iter=20):
    x = np.asarray(x0, dtype=float)
    for _ in range(max_iter):
        r = F(x)
        if np.max(np.abs(r)) < tol:
            break
        J = real_jacobian(F, x, h=1e-5, vectorized=True)
        try:
            x = x - np.linalg.lstsq(J, r, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
    return x


class _Stager:
    """Tracks the accumulated pair while applying elementary moves to jets."""

    def __init__(self, base: list[Jet], eps: int):
        self.base, self.eps = base, eps
        self.g, self.gp = TRIVIAL, TRIVIAL_PRIME
        self.jets = base

    def trial(self, d: GammaParams, dp: GammaPrimeParams) -> list[Jet]:
        return act_jets(d, dp, None, self.eps, WORK_ORDER, base=self.jets)

    def apply(self, d: GammaParams, dp: GammaPrimeParams):
        self.g = compose_gamma(d, self.g)
        self.gp = compose_gamma_prime(dp, self.gp, self.eps)
        self.jets = act_jets(self.g, self.gp, None, self.eps, WORK_ORDER, base=self.base)


def _unit(x):
    x = complex(x)
    return x / abs(x) if abs(x) > 0 else 1.0


def stage_a(base: list[Jet], eps: int) -> tuple[GammaParams, GammaPrimeParams, str]:
    st = _Stager(base, eps)
    f1, f2, g = st.jets

    # first order: target linear part
    b = complex(_d(g, 0, 1)).real
    v = np.array([_d(f1, 1, 0), _d(f2, 1, 0)], dtype=complex)
    m = np.array([_d(f1, 0, 1), _d(f2, 0, 1)], dtype=complex)
    levi = abs(v[0]) ** 2 + eps * abs(v[1]) ** 2
    if not (b > 0 and levi > 0) or not np.all(np.isfinite(v)):
        raise NotInF2(f"transversality fails: g_w(0) = {b:.3g}")
    vh = v / np.sqrt(levi)
    st.apply(TRIVIAL, GammaPrimeParams(1 / np.sqrt(b), 0.0, 1.0, np.conj(vh[0]), -np.conj(vh[1]),
                                       -m[0] / b, -m[1] / b).check(eps))

    # dilation fixing f2_{z^2} = 2
    p = complex(_d(st.jets[1], 2, 0))
    if not abs(p) > 0:
        raise NotInF2("2-nondegeneracy fails")
    lam = abs(p) / 2
    st.apply(GammaParams(lam, 0.0, 1.0, 0.0), GammaPrimeParams(lam, 0.0, abs(p) / p, p / abs(p), 0.0, 0.0, 0.0))

    # c-step: f2_{zw} = 0
    def c_pair(x):
        c = x[..., 0] + 1j * x[..., 1]
        return GammaParams(1.0, 0.0, 1.0, -c), GammaPrimeParams(1.0, 0.0, 1.0, 1.0, 0.0, -c, 0.0)

    def c_res(x):
        v = np.asarray(_d(st.trial(*c_pair(x))[1], 1, 1))
        return np.stack([v.real, v.imag], axis=-1)

    st.apply(*c_pair(_newton2(c_res, [0.0, 0.0])))

    # r-step: Re g_{w^2} = 0, Re f2_{z^2 w} = 0
    def r_pair(x):
        return GammaParams(1.0, -x[..., 0], 1.0, 0.0), GammaPrimeParams(1.0, x[..., 1], 1.0, 1.0, 0.0, 0.0, 0.0)

    def r_res(x):
        j = st.trial(*r_pair(x))
        return np.stack(np.broadcast_arrays(np.real(_d(j[2], 0, 2)), np.real(_d(j[1], 2, 1))), axis=-1)

    st.apply(*r_pair(_newton2(r_res, [0.0, 0.0])))

    # rotation: f1_{w^2} to the nonnegative axis; at s = 0 fix x = f2_{w^2} instead
    a = complex(_d(st.jets[0], 0, 2))
    x = complex(_d(st.jets[1], 0, 2))
    note = ""
    if abs(a) > GAUGE_TOL:
        u = _unit(a)
    elif abs(x) > GAUGE_TOL:
        u = complex(np.sqrt(-eps * x / abs(x)))
        u = _unit(u)
        note = "s = 0: rotation fixed by f2_w2 = -eps|f2_w2| (two-element stabilizer)"
    else:
        u = 1.0
        note = "s = 0: rotation gauge u = 1 (circle stabilizer)"
    st.apply(GammaParams(1.0, 0.0, np.conj(u), 0.0), GammaPrimeParams(1.0, 0.0, np.conj(u) ** 3, u ** 2, 0.0, 0.0, 0.0))
    return st.g, st.gp, note


# --------------------------------------------------------------------------
# stage B
# --------------------------------------------------------------------------

def _residual_fn(base: list[Jet], eps: int):
    def F(x):
        g, gp = params_from_chart(x, eps)
        return condition_vector(act_jets(g, gp, None, eps, WORK_ORDER, base=base))
    return F


def levenberg_marquardt(F, x0, tol=TARGET_TOL, max_iter=MAX_ITER, vectorized=True):
    """Minimize |F|^2; returns (x, residual vector, iterations, history of max |F|)."""
    x = np.asarray(x0, dtype=float)
    r = F(x)
    mu = 1e-3
    hist = [float(np.max(np.abs(r)))]
    it = 0
    while it < max_iter and hist[-1] >= tol:
        it += 1
        J = real_jacobian(F, x, vectorized=vectorized)
        A, gvec = J.T @ J, J.T @ r
        improved = False
        for _ in range(30):
            step = np.linalg.solve(A + mu * np.diag(np.diag(A) + 1e-12), -gvec)
            xn = x + step
            try:
                rn = F(xn)
            except Exception:  # noqa: BLE001 - leaving the chart domain counts as a rejected step
                rn = None
            if rn is not None and np.all(np.isfinite(rn)) and rn @ rn < r @ r:
                x, r = xn, rn
                mu = max(mu / 10, 1e-15)
                improved = True
                break
            mu *= 10
        hist.append(float(np.max(np.abs(r))))
        if not improved:
            break
    return x, r, it, hist


def normalize(H: RationalMapGerm, eps, check: bool = True, tol: float = TARGET_TOL,
              max_iter: int = MAX_ITER, accept: float = ACCEPT_TOL) -> NormalizationResult:
    eps = check_eps(eps)
    if check:
        diag = is_in_F2(H, eps)
        if not diag.in_F2:
            raise NotInF2("; ".join(diag.reasons))
    base = H.jets(WORK_ORDER)
    g0, gp0, note = stage_a(base, eps)
    F = _residual_fn(base, eps)
    x, r, it, hist = levenberg_marquardt(F, params_to_chart(g0, gp0), tol, max_iter)
    g, gp = params_from_chart(x, eps)
    g = GammaParams(float(g.lam), float(g.r), complex(g.u), complex(g.c))
    gp = GammaPrimeParams(float(gp.lam), float(gp.r), complex(gp.u), complex(gp.a1), complex(gp.a2),
                          complex(gp.c1), complex(gp.c2), 1)
    report = verify_normal_conditions(act_jets(g, gp, None, eps, WORK_ORDER, base=base))
    if not report.passed(accept):
        raise NoConvergence(f"normal-form residual {report.max_residual:.3g} above {accept:g}",
                            residuals=report.residuals)
    return NormalizationResult(act(g, gp, H, eps), g, gp, report.residuals, note, it, hist)


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------

@dataclass
class Classification:
    id: NormalFormID
    certificate: float
    distances: dict
    result: NormalizationResult
    tol: float = CLASSIFY_TOL

    @property
    def matching_families(self) -> list[int]:
        """Every family whose member at the classified s is within ``tol``.

        More than one entry means the map sits where two family curves meet
        (for eps = -1, G_{2,1/2} and G_{3,1/2} are the same map)."""
        return sorted(int(k) for k, d in self.distances.items() if d < self.tol)

    def to_json(self) -> dict:
        return {**self.id.to_json(), "certificate": self.certificate,
                "distances": self.distances, "matching_families": self.matching_families,
                "gauge_note": self.result.gauge_note}


def classify_normalized(Hn: RationalMapGerm, eps, order: int = 4):
    """Nearest catalog member to an already normalized map."""
    eps = check_eps(eps)
    J = jet_coordinates(Hn, order)
    s = float(2 * abs(J["H_w2[0]"]))
    cands = [NormalFormID(2, s, eps), NormalFormID(3, s, eps)]
    if s < CLASSIFY_TOL:
        cands.insert(0, NormalFormID(1, 0.0, eps))
    dist = {c.family: jet_distance(J, jet_coordinates(normal_form_map(c), order)) for c in cands}
    best = min(cands, key=lambda c: dist[c.family])
    return best, dist[best.family], dist


def classify(H: RationalMapGerm, eps, tol: float = CLASSIFY_TOL, check: bool = True,
             order: int = 4) -> Classification:
    res = normalize(H, eps, check=check)
    best, cert, dist = classify_normalized(res.normalized, eps, order)
    out = Classification(best, cert, {str(k): v for k, v in dist.items()}, res, tol)
    if not cert < tol:
        raise Unclassifiable(f"nearest catalog member {best.label()} at distance {cert:.3g}", certificate=cert)
    return out
