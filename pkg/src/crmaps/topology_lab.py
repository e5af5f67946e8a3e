"""Experiments on the moduli picture: orbit sweeps, accumulation, components."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .catalog import NormalFormID, jet_coordinates, normal_form_map
from .errors import CRMapsError, SearchStalled, SelfCheckFailed
from .hypersurfaces import SourcePoint, check_eps
from .isotropies import orient_transversal, recenter
from .normalization import classify

ACCUMULATION_THRESHOLD = 1e-2
CONTROL_THRESHOLD = 0.05
COINCIDENCE_TOL = 1e-9
PENALTY = 10.0


# --------------------------------------------------------------------------
# the family curves s -> j_0(G_{k,s}) in closed form
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def family_curve(k: int, eps: int) -> np.ndarray:
    """Coefficients C (3, 17) with j_0(G_{k,s,eps}) = C[0] + s C[1] + s^2 C[2].

    Fitted from s = 0, 1, 2 and checked at s = 3 and s = 0.37.
    """
    eps = check_eps(eps)
    if k == 1:
        return np.stack([jet_coordinates(normal_form_map(NormalFormID(1, 0.0, eps))).values,
                         np.zeros(17), np.zeros(17)])
    v = [jet_coordinates(normal_form_map(NormalFormID(k, float(s), eps))).values for s in (0, 1, 2)]
    C = np.stack([v[0], (4 * v[1] - 3 * v[0] - v[2]) / 2, (v[0] - 2 * v[1] + v[2]) / 2])
    for s in (3.0, 0.37):
        ref = jet_coordinates(normal_form_map(NormalFormID(k, s, eps))).values
        if np.max(np.abs(ref - (C[0] + s * C[1] + s * s * C[2]))) > 1e-12 * (1 + s * s):
            raise SelfCheckFailed(f"family {k} jets are not quadratic in s")
    return C


def curve_point(k: int, eps: int, s) -> np.ndarray:
    C = family_curve(k, eps)
    s = np.asarray(s, dtype=float)[..., None]
    return C[0] + s * C[1] + s * s * C[2]


def nearest_on_family(values: np.ndarray, k: int, eps: int) -> tuple[float, float]:
    """(s*, distance) minimizing |values - j_0(G_{k,s})| over s >= 0 (exact)."""
    if k == 1:
        return 0.0, float(np.linalg.norm(values - family_curve(1, eps)[0]))
    C = family_curve(k, eps)
    d0 = C[0] - values
    # |d0 + s C1 + s^2 C2|^2 is a real quartic in s; minimize at critical points
    re = lambda a, b: float(np.real(np.vdot(a, b)))  # noqa: E731
    quartic = [re(C[2], C[2]), 2 * re(C[1], C[2]), re(C[1], C[1]) + 2 * re(d0, C[2]), 2 * re(d0, C[1]), re(d0, d0)]
    crit = np.roots(np.polyder(quartic))
    cands = [0.0] + [float(r.real) for r in crit if abs(r.imag) < 1e-9 and r.real > 0]
    vals = [np.polyval(quartic, s) for s in cands]
    i = int(np.argmin(vals))
    return cands[i], float(math.sqrt(max(vals[i], 0.0)))


def family_gap(k1: int, k2: int, eps: int, s_grid) -> tuple[float, float, float]:
    """min over s in s_grid of the distance from G_{k1,s} to the k2 curve: (dist, s1, s2)."""
    best = (np.inf, 0.0, 0.0)
    for s in s_grid:
        s2, d = nearest_on_family(curve_point(k1, eps, s), k2, eps)
        if d < best[0]:
            best = (d, float(s), s2)
    return best


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

@dataclass
class SweepRecord:
    base: NormalFormID
    p: SourcePoint
    classified: NormalFormID | None
    certificate: float
    other_family_distance: float
    flags: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.classified is not None and self.certificate < 1e-6

    def to_row(self) -> dict:
        z = complex(self.p.z)
        c = self.classified
        return {"p_re": z.real, "p_im": z.imag, "p_u": float(self.p.u),
                "family": c.family if c else "", "s": c.s if c else "",
                "certificate": self.certificate, "flags": ";".join(self.flags)}


CSV_COLUMNS = ["p_re", "p_im", "p_u", "family", "s", "certificate", "flags"]


def recentered_germ(base: NormalFormID, p: SourcePoint, orient: bool = True):
    H = recenter(normal_form_map(base), p, base.eps)
    return orient_transversal(H, base.eps) if orient else H


def sweep_point(base: NormalFormID, p: SourcePoint, orient: bool = True, check: bool = True) -> SweepRecord:
    eps = base.eps
    try:
        H = recenter(normal_form_map(base), p, eps)
        flags = []
        if orient:
            H2 = orient_transversal(H, eps)
            if H2 is not H:
                flags.append("oriented")
            H = H2
        c = classify(H, eps, check=check)
    except CRMapsError as exc:
        return SweepRecord(base, p, None, math.inf, math.nan, [f"OutOfClass:{type(exc).__name__}"])
    vals = jet_coordinates(c.result.normalized).values
    others = [k for k in (1, 2, 3) if k != c.id.family]
    other = min(nearest_on_family(vals, k, eps)[1] for k in others)
    return SweepRecord(base, p, c.id, c.certificate, other, flags or ["ok"])


def orbit_sweep(base: NormalFormID, grid: list[SourcePoint], eps=None, orient: bool = True,
                check: bool = True) -> list[SweepRecord]:
    if eps is not None and check_eps(eps) != base.eps:
        raise ValueError("eps disagrees with the base map")
    return [sweep_point(base, p, orient, check) for p in grid]


def make_grid(spec: str) -> list[SourcePoint]:
    """Parse 'polar:rmax=0.5,nr=10,ntheta=5,u=0', 'ray:angle=0,rmax=0.7,n=20,u=0' or
    'box:rmax=0.5,n=7,umax=0.2' into source points (z, u)."""
    kind, _, rest = spec.partition(":")
    kv = dict(item.split("=") for item in rest.split(",") if item)
    f = lambda key, d: float(kv.get(key, d))  # noqa: E731
    if kind == "polar":
        rmax, nr, nt, u = f("rmax", 0.5), int(f("nr", 10)), int(f("ntheta", 5)), f("u", 0.0)
        return [SourcePoint(complex(r * np.exp(1j * t)), u)
                for r in np.linspace(0, rmax, nr) for t in 2 * np.pi * np.arange(nt) / nt]
    if kind == "ray":
        ang, rmax, n, u = f("angle", 0.0), f("rmax", 0.5), int(f("n", 20)), f("u", 0.0)
        return [SourcePoint(complex(r * np.exp(1j * ang)), u) for r in np.linspace(0, rmax, n)]
    if kind == "box":
        rmax, n, umax = f("rmax", 0.5), int(f("n", 5)), f("umax", 0.2)
        xs = np.linspace(-rmax, rmax, n)
        us = np.linspace(-umax, umax, n)
        return [SourcePoint(complex(x, y), u) for x in xs for y in xs for u in us]
    raise ValueError(f"unknown grid kind {kind!r} (polar, ray, box)")


def s_coverage(records: list[SweepRecord], lo: float = 0.0, hi: float = 0.5) -> dict:
    """Largest gap of the classified s-values inside [lo, hi]."""
    s = sorted({round(r.classified.s, 12) for r in records if r.valid})
    inside = [lo] + [x for x in s if lo < x < hi] + [hi]
    covered = bool(s) and min(s) <= lo + 1e-9 and max(s) >= hi
    gaps = np.diff(inside)
    return {"covered": covered, "max_gap": float(gaps.max()) if len(gaps) else math.inf,
            "s_min": s[0] if s else None, "s_max": s[-1] if s else None}


# --------------------------------------------------------------------------
# accumulation
# --------------------------------------------------------------------------

@dataclass
class AccumulationReport:
    best_distance: float
    best_p: SourcePoint
    best_s: float | None
    families: dict
    n_evaluations: int
    trace: list
    source: NormalFormID
    target: NormalFormID
    coincident: int = 0

    @property
    def all_source_family(self) -> bool:
        return set(self.families) <= {self.source.family}

    def to_json(self) -> dict:
        return {"best_distance": self.best_distance,
                "best_p": {"z": [self.best_p.z.real, self.best_p.z.imag], "u": self.best_p.u},
                "best_s": self.best_s, "families": self.families, "n_evaluations": self.n_evaluations,
                "source": self.source.to_json(), "target": self.target.to_json(),
                "all_source_family": self.all_source_family, "coincident": self.coincident,
                "trace_length": len(self.trace)}


def accumulation_search(target: NormalFormID = NormalFormID(2, 0.5, -1),
                        source: NormalFormID = NormalFormID(3, 0.0, -1),
                        radius: float = 1.0, n_grid: int = 20, steps: int = 200,
                        threshold: float = ACCUMULATION_THRESHOLD, orient: bool = True,
                        raise_on_stall: bool = True) -> AccumulationReport:
    """Minimize the jet distance from normalized, recentered members of the
    source orbit to the target, over the translation point p = (z0, u).

    Normalization inside the objective plays the role of the isotropy part of
    the search.  The trace holds (evaluation index, best distance so far, z, u).
    """
    if source.eps != target.eps:
        raise ValueError("source and target must share eps")
    eps = source.eps
    JT = curve_point(target.family, eps, target.s)
    H = normal_form_map(source)
    families: dict = {}
    coincident = [0]
    trace: list = []
    best = [math.inf, SourcePoint(0j, 0.0), None]

    def objective(x):
        p = SourcePoint(complex(x[0], x[1]), float(x[2]))
        try:
            with np.errstate(all="ignore"):
                Hp = recenter(H, p, eps)
                if orient:
                    Hp = orient_transversal(Hp, eps)
                c = classify(Hp, eps, check=False)
        except CRMapsError:
            return PENALTY
        # where two family curves meet, the nearest label is decided by noise;
        # a point that also matches the source family is counted as such
        matches = c.matching_families
        fam = source.family if source.family in matches else c.id.family
        coincident[0] += len(matches) > 1
        families[fam] = families.get(fam, 0) + 1
        d = float(np.linalg.norm(jet_coordinates(c.result.normalized).values - JT))
        if d < best[0]:
            best[:] = [d, p, c.id.s]
        trace.append((len(trace), best[0], x[0], x[1], x[2]))
        return d

    objective(np.zeros(3))
    grid = [(r * math.cos(t), r * math.sin(t), 0.0)
            for r in np.linspace(radius / n_grid, radius, n_grid)
            for t in 2 * np.pi * np.arange(n_grid) / n_grid]
    for x in grid:
        objective(np.array(x))
    if best[0] > 0:
        x0 = np.array([best[1].z.real, best[1].z.imag, best[1].u])
        simplex = x0 + np.vstack([np.zeros(3), np.eye(3) * radius / n_grid])
        minimize(objective, x0, method="Nelder-Mead",
                 options={"maxfev": steps, "initial_simplex": simplex, "xatol": 1e-12, "fatol": 1e-14})
    rep = AccumulationReport(best[0], best[1], best[2], families, len(trace), trace, source, target,
                             coincident[0])
    if raise_on_stall and not rep.best_distance < threshold:
        raise SearchStalled(f"best distance {rep.best_distance:.3g} above {threshold:g}", report=rep)
    return rep


# --------------------------------------------------------------------------
# components
# --------------------------------------------------------------------------

def component_census(eps, s_max: float = 2.0, ds: float = 0.05, tol: float = COINCIDENCE_TOL) -> dict:
    """Connected components of the catalog graph.

    Nodes: G1, and G_{k,s} on an s-grid for k = 2, 3.  Edges join grid
    neighbours of one family (continuous path) and members of different
    families whose jets coincide within ``tol`` (the curve of the other family
    is searched exactly, then the coincidence point is added as a node).
    """
    eps = check_eps(eps)
    s_grid = np.round(np.arange(0, s_max + ds / 2, ds), 12)
    nodes = [(1, 0.0)]
    edges = []
    for k in (2, 3):
        for s in s_grid:
            nodes.append((k, float(s)))
    index = {n: i for i, n in enumerate(nodes)}

    def node(k, s):
        key = (k, float(s))
        if key not in index:
            index[key] = len(nodes)
            nodes.append(key)
        return index[key]

    joins = []
    for k1, k2 in ((2, 3), (2, 1), (3, 1)):
        fine = np.linspace(0, s_max, 4001)
        d, s1, s2 = family_gap(k1, k2, eps, fine)
        if d < 1e-3:  # refine around the candidate
            fine = np.linspace(max(s1 - 1e-3, 0), s1 + 1e-3, 4001)
            d, s1, s2 = family_gap(k1, k2, eps, fine)
        if d < tol:
            joins.append({"families": [k1, k2], "s": [s1, s2], "distance": d})
            edges.append((node(k1, s1), node(k2, s2 if k2 != 1 else 0.0)))
    for k in (2, 3):
        pts = sorted(s for kk, s in nodes if kk == k)
        for a, b in zip(pts, pts[1:]):
            edges.append((index[(k, a)], index[(k, b)]))
    n = len(nodes)
    e = np.array(edges).T if edges else np.zeros((2, 0), int)
    A = coo_matrix((np.ones(e.shape[1]), (e[0], e[1])), shape=(n, n))
    count, labels = connected_components(A, directed=False)
    members: dict = {}
    for (k, s), lab in zip(nodes, labels):
        members.setdefault(int(lab), set()).add(k)
    return {"eps": eps, "count": int(count),
            "components": [{"families": sorted(v)} for v in members.values()],
            "joins": joins, "s_max": s_max, "ds": ds}


def continuity_study(k: int, eps, s_lo: float = 0.1, s_hi: float = 1.0, levels=(0.1, 0.05, 0.025, 0.0125)) -> list:
    """Max jet step along the family curve for successively finer s-grids."""
    out = []
    for ds in levels:
        s = np.arange(s_lo, s_hi + ds / 2, ds)
        J = curve_point(k, eps, s)
        out.append({"ds": ds, "max_step": float(np.max(np.linalg.norm(np.diff(J, axis=0), axis=-1)))})
    return out


def quotient_topology_probe(eps=-1, accumulation: AccumulationReport | None = None,
                            n_values=(2, 4, 8, 16, 32, 64)) -> dict:
    eps = check_eps(eps)
    limit = curve_point(2, eps, 0.5)
    seq = []
    for n in n_values:
        c = classify(normal_form_map(NormalFormID(2, 0.5 + 1 / n, eps)), eps)
        seq.append({"n": n, "s": c.id.s,
                    "distance_to_limit": float(np.linalg.norm(jet_coordinates(c.result.normalized).values - limit))})
    d = [r["distance_to_limit"] for r in seq]
    gap, s2, s3 = family_gap(2, 3, eps, np.linspace(0, 2, 4001))
    rep = {"eps": eps, "sequence": seq, "continuous": bool(all(np.diff(d) < 0) and d[-1] < 0.1),
           "family_gap": {"distance": gap, "s2": s2, "s3": s3},
           "curves_separated": bool(gap > CONTROL_THRESHOLD)}
    if accumulation is not None:
        rep["accumulation"] = accumulation.to_json()
    return rep
