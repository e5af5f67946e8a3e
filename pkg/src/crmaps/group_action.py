"""Orbit map of the isotropy action, its rank, stabilizers, and convergence runs.

Orbit chart (16 reals), in this order:
    lam, r, arg u, Re c, Im c,
    lam', r', arg u', arg a1', Re a2', Im a2', Re c1', Im c1', Re c2', Im c2',
    s
The base point xi_0 (trivial isotropies, s = s0) is
    (1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, s0).
The 12 + 4 layout used in the literature lists lam, lam' and a1' = 1 in their
own slots and the conjugate parameters separately; a real chart needs neither,
so the two layouts agree up to reordering and dropping the conjugate slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import Jet, RationalMapGerm, real_jacobian
from .catalog import JetCoords, NormalFormID, jet_coords_from_jets, jet_coordinates, normal_form_map
from .errors import Inconsistent
from .hypersurfaces import DEFAULT_SEED, check_eps
from .isotropies import (
    GammaParams, GammaPrimeParams, TRIVIAL, TRIVIAL_CHART, act, act_jets, compose_gamma,
    compose_gamma_prime, param_distance, params_from_chart, params_to_chart,
)
from .normalization import levenberg_marquardt, normalize

N0 = 16
RANK_STEP = 1e-6
RANK_REL_TOL = 1e-8


@dataclass(frozen=True)
class OrbitParams:
    gamma: GammaParams
    gamma_p: GammaPrimeParams
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("s must be positive on the orbit chart")

    @property
    def chart(self) -> np.ndarray:
        return np.append(params_to_chart(self.gamma, self.gamma_p), self.s)

    @classmethod
    def from_chart(cls, x, eps) -> "OrbitParams":
        x = np.asarray(x, dtype=float)
        g, gp = params_from_chart(x[:15], eps)
        g = GammaParams(float(g.lam), float(g.r), complex(g.u), complex(g.c))
        gp = GammaPrimeParams(float(gp.lam), float(gp.r), complex(gp.u), complex(gp.a1), complex(gp.a2),
                              complex(gp.c1), complex(gp.c2))
        return cls(g, gp, float(x[15]))


def base_chart(s0: float) -> np.ndarray:
    return np.append(TRIVIAL_CHART, s0)


_JET_CACHE: dict = {}


def catalog_jets(k: int, s: float, eps: int, order: int) -> list[Jet]:
    key = (k, float(s), eps, order)
    if key not in _JET_CACHE:
        if len(_JET_CACHE) > 4096:
            _JET_CACHE.clear()
        _JET_CACHE[key] = normal_form_map(NormalFormID(k, float(s), eps)).jets(order)
    return _JET_CACHE[key]


def orbit_map(xi: OrbitParams, k: int, eps, order: int = 4) -> JetCoords:
    eps = check_eps(eps)
    if k not in (2, 3):
        raise ValueError("orbit_map is defined for families 2 and 3")
    base = catalog_jets(k, xi.s, eps, order)
    return jet_coords_from_jets(act_jets(xi.gamma, xi.gamma_p, None, eps, order, base=base))


def orbit_map_real(X, k: int, eps, order: int = 3) -> np.ndarray:
    """Vectorized Psi on stacked chart points, real/imaginary parts split (..., 34)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty((X.shape[0], 34))
    for s in np.unique(X[:, 15]):
        idx = np.flatnonzero(X[:, 15] == s)
        g, gp = params_from_chart(X[idx, :15], eps)
        jets = act_jets(g, gp, None, eps, order, base=catalog_jets(k, s, eps, order))
        out[idx] = jet_coords_from_jets(jets).as_real()
    return out


def rank_at_base(k: int, eps, s0: float, step: float = RANK_STEP, rel_tol: float = RANK_REL_TOL) -> dict:
    eps = check_eps(eps)
    if not s0 > 0:
        raise ValueError("s0 must be positive")
    J = real_jacobian(lambda X: orbit_map_real(X, k, eps), base_chart(s0), h=step, vectorized=True)
    sv = np.linalg.svd(J, compute_uv=False)
    sv_frozen = np.linalg.svd(J[:, :15], compute_uv=False)
    rank = int(np.sum(sv >= rel_tol * sv[0]))
    return {"family": k, "eps": eps, "s0": s0, "rank": rank,
            "rank_s_frozen": int(np.sum(sv_frozen >= rel_tol * sv_frozen[0])),
            "sigma_ratio": float(sv[-1] / sv[0]), "singular_values": [float(x) for x in sv[:20]],
            "shape": list(J.shape)}


# --------------------------------------------------------------------------
# stabilizers
# --------------------------------------------------------------------------

def rotation_pair(u: complex) -> tuple[GammaParams, GammaPrimeParams]:
    """sigma = (uz, w), sigma' = (u z1', u^2 z2', w').

    With act = sigma' o H o sigma^{-1} this is the rotation circle; written as
    H = sigma' o H o sigma it reads (uz, w; z1'/u, z2'/u^2, w').
    """
    u = complex(u)
    return GammaParams(1.0, 0.0, u, 0.0), GammaPrimeParams(1.0, 0.0, u ** 3, np.conj(u) ** 2, 0.0, 0.0, 0.0)


def reflection_pair() -> tuple[GammaParams, GammaPrimeParams]:
    """(-z, w; -z1', z2', w')."""
    return GammaParams(1.0, 0.0, -1.0, 0.0), GammaPrimeParams(1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0)


def _jet_vector(jets: list[Jet]) -> np.ndarray:
    c = np.concatenate([j.c for j in jets], -1)
    return np.concatenate([c.real, c.imag], -1)


def stabilizer_residual(g, gp, H_jets: list[Jet], eps) -> float:
    """Max coefficient difference between the jets of act(g, gp, H) and of H."""
    order = H_jets[0].order
    moved = act_jets(g, gp, None, eps, order, base=H_jets)
    return float(np.max(np.abs(_jet_vector(moved) - _jet_vector(H_jets)), axis=-1))


def sample_box(n: int, eps, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Seeded chart points: lam, lam' in [0.5, 2]; |r|, |r'| <= 1; |c|, |c'_j|, |a2'| <= 0.5."""
    rng = np.random.default_rng(seed)

    def disc(m, rad):
        rho = rad * np.sqrt(rng.random(m))
        th = rng.uniform(0, 2 * np.pi, m)
        return np.stack([rho * np.cos(th), rho * np.sin(th)], -1)

    ang = lambda: rng.uniform(-np.pi, np.pi, n)  # noqa: E731
    cols = [rng.uniform(0.5, 2, n), rng.uniform(-1, 1, n), ang(), *disc(n, 0.5).T,
            rng.uniform(0.5, 2, n), rng.uniform(-1, 1, n), ang(), ang(), *disc(n, 0.5).T,
            *disc(n, 0.5).T, *disc(n, 0.5).T]
    return np.stack(cols, -1)


def random_stabilizer_search(H: RationalMapGerm, eps, n: int = 10_000, seed: int = DEFAULT_SEED,
                             refine: int = 5, order: int = 3, tol: float = 1e-8) -> dict:
    eps = check_eps(eps)
    H_jets = H.jets(order)
    ref = _jet_vector(H_jets)
    X = sample_box(n, eps, seed)
    g, gp = params_from_chart(X, eps)
    res = np.max(np.abs(_jet_vector(act_jets(g, gp, None, eps, order, base=H_jets)) - ref), axis=-1)
    best = np.argsort(res)[:refine]

    def F(Y):
        gg, ggp = params_from_chart(Y, eps)
        return _jet_vector(act_jets(gg, ggp, None, eps, order, base=H_jets)) - ref

    found = []
    for i in best:
        x, r, it, _ = levenberg_marquardt(F, X[i], tol=1e-13, max_iter=60)
        gg, ggp = params_from_chart(x, eps)
        found.append({"start_residual": float(res[i]), "residual": float(np.max(np.abs(r))),
                      "distance_from_trivial": param_distance(gg, ggp), "chart": [float(v) for v in x]})
    nontrivial = [f for f in found if f["residual"] < tol and f["distance_from_trivial"] > 1e-4]
    return {"n_candidates": n, "seed": seed, "min_sample_residual": float(res.min()),
            "refined": found, "nontrivial": nontrivial}


@dataclass
class StabilizerReport:
    classification: str
    s: float
    witnesses: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"classification": self.classification, "s": self.s, "witnesses": self.witnesses}


def stabilizer_classify(H: RationalMapGerm, eps, n_circle: int = 16, n_random: int = 10_000,
                        seed: int = DEFAULT_SEED, tol: float = 1e-12) -> StabilizerReport:
    eps = check_eps(eps)
    H_jets = H.jets(4)
    s = float(2 * abs(H_jets[0].derivative((0, 2))))
    us = np.exp(2j * np.pi * np.arange(n_circle) / n_circle)
    circle = [stabilizer_residual(*rotation_pair(u), H_jets, eps) for u in us]
    refl = stabilizer_residual(*reflection_pair(), H_jets, eps)
    wit = {"circle_residuals": circle, "reflection_residual": refl}
    if max(circle) < tol:
        kind = "circle"
    elif refl < tol:
        kind = "two_element"
    else:
        search = random_stabilizer_search(H, eps, n_random, seed)
        wit["random_search"] = search
        kind = "trivial" if not search["nontrivial"] else "nontrivial_found"
    predicted_trivial = s > 1e-8
    if predicted_trivial != (kind == "trivial"):
        raise Inconsistent(f"stabilizer '{kind}' disagrees with s = {s:.6g}")
    return StabilizerReport(kind, s, wit)


# --------------------------------------------------------------------------
# convergence experiments
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SequenceSpec:
    """phi_n acting on a fixed base map; ``kind`` is 'constant', 'c_decay' or 'lambda_growth'."""

    kind: str = "c_decay"
    base: NormalFormID = NormalFormID(2, 0.5, -1)
    n_values: tuple = (1, 2, 4, 8, 16, 32, 64)

    def pair(self, n: int) -> tuple[GammaParams, GammaPrimeParams]:
        if self.kind == "constant":
            return TRIVIAL, GammaPrimeParams()
        if self.kind == "c_decay":
            return GammaParams(1.0, 0.0, 1.0, 1.0 / n), GammaPrimeParams()
        if self.kind == "lambda_growth":
            return GammaParams(float(n), 0.0, 1.0, 0.0), GammaPrimeParams()
        raise ValueError(f"unknown sequence kind {self.kind!r}")


def _slope(n, d):
    n, d = np.asarray(n, float), np.asarray(d, float)
    ok = d > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(n[ok]), np.log(d[ok]), 1)[0])


def convergence_experiment(spec: SequenceSpec, eps=None) -> dict:
    """Track phi_n -> id and the images act(phi_n, H) -> H in jet coordinates.

    For each n the image is renormalized; the recovered pair composed with
    phi_n must be trivial (freeness), and its distance is reported as well.
    """
    eps = check_eps(spec.base.eps if eps is None else eps)
    H = normal_form_map(NormalFormID(spec.base.family, spec.base.s, eps))
    JH = jet_coordinates(H)
    H_jets = H.jets(4)
    rows = []
    for n in spec.n_values:
        g, gp = spec.pair(n)
        img = jet_coords_from_jets(act_jets(g, gp, None, eps, 4, base=H_jets))
        row = {"n": n, "param_distance": param_distance(g, gp),
               "jet_distance": float(np.linalg.norm(img.values - JH.values)),
               "image_g_w": float(np.real(img["H_w[2]"]))}
        try:
            res = normalize(act(g, gp, H, eps), eps, check=False)
            row["recovered_composite_distance"] = param_distance(compose_gamma(res.gamma, g),
                                                                 compose_gamma_prime(res.gamma_p, gp, eps))
        except Exception as exc:  # noqa: BLE001 - a failing normalization is itself data
            row["recovered_composite_distance"] = None
            row["error"] = type(exc).__name__
        rows.append(row)
    ns = [r["n"] for r in rows]
    pd = [r["param_distance"] for r in rows]
    jd = [r["jet_distance"] for r in rows]
    p_slope, j_slope = _slope(ns, pd), _slope(ns, jd)
    gw = [r["image_g_w"] for r in rows]
    return {"kind": spec.kind, "base": spec.base.to_json(), "eps": eps, "rows": rows,
            "param_slope": p_slope, "jet_slope": j_slope,
            "converged": bool(max(jd) < 1e-12 or (j_slope is not None and j_slope < -0.5)),
            "divergent": bool(p_slope is not None and p_slope > 0.5),
            "image_leaves_F2": bool(gw[-1] < 1e-2 * gw[0])}
