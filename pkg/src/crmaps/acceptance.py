"""The nine acceptance checks, shared by the test suite and ``crmaps verify``."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .algebra import Jet
from .catalog import NormalFormID, faran_lebl_map, jet_coordinates, jet_distance, normal_form_map
from .errors import SearchStalled
from .group_action import (
    rank_at_base, random_stabilizer_search, reflection_pair, rotation_pair, sample_box,
    stabilizer_residual,
)
from .hypersurfaces import DEFAULT_SEED, maps_hypersurface, maps_sphere_model
from .isotropies import (
    act, compose_gamma, compose_gamma_prime, compose_jet, invert_gamma, invert_gamma_prime,
    param_distance, params_from_chart, sigma_jets, sigma_prime_jets,
)
from .normalization import classify
from .topology_lab import accumulation_search, component_census, make_grid, orbit_sweep, s_coverage

S_GRID = (0, 0.25, 0.5, 1, 2)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0
    limit: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.number}: {self.name} ({self.seconds:.1f}s, limit {self.limit:.0f}s)"

    def to_json(self) -> dict:
        return {"criterion": self.number, "name": self.name, "pass": self.passed,
                "seconds": self.seconds, "limit_seconds": self.limit, "detail": self.detail}


def _timed(number, name, limit, fn):
    t = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t
    return CriterionResult(number, name, bool(ok and dt < limit), {**detail, "within_time": dt < limit}, dt, limit)


def criterion_1() -> CriterionResult:
    def run():
        worst = 0.0
        for k, s, eps in itertools.product((1, 2, 3), S_GRID, (1, -1)):
            if k == 1 and s:
                continue
            worst = max(worst, maps_hypersurface(normal_form_map(NormalFormID(k, s, eps)), eps).max_residual)
        sphere = {}
        for idx in range(1, 7):
            for eps in ((1, -1) if idx <= 4 else (-1,)):
                rep = maps_sphere_model(faran_lebl_map(idx, eps), eps)
                sphere[f"{idx},{eps}"] = rep.max_residual
        ok = worst < 1e-10 and all(v < 1e-10 for v in sphere.values())
        return ok, {"max_heisenberg_residual": worst, "sphere_residuals": sphere}
    return _timed(1, "catalog membership", 10, run)


def criterion_2() -> CriterionResult:
    def run():
        worst, worst_s = 0.0, 0.0
        for k, s, eps in itertools.product((1, 2, 3), S_GRID, (1, -1)):
            if k == 1 and s:
                continue
            J = jet_coordinates(normal_form_map(NormalFormID(k, s, eps)))
            forced = np.array([1, 0, 0, 0, 0, 1, 0, 2, 0, 0.5j * eps, 0, 0])
            worst = max(worst, float(np.max(np.abs(J.values[:12] - forced))))
            worst_s = max(worst_s, abs(2 * abs(J["H_w2[0]"]) - s))
        return worst < 1e-12 and worst_s < 1e-10, {"forced_value_error": worst, "s_recovery_error": worst_s}
    return _timed(2, "normalized-jet table", 5, run)


def criterion_3(n_pairs: int = 100, seed: int = DEFAULT_SEED) -> CriterionResult:
    """Each of n_pairs seeded pairs per eps is applied to all six (k, s) members."""
    def run():
        worst = {"ds": 0.0, "jet": 0.0, "inverse": 0.0}
        wrong = []
        count = 0
        for e in (1, -1):
            X = sample_box(n_pairs, e, seed + (e < 0))
            g, gp = params_from_chart(X, e)
            for i in range(n_pairs):
                gi, gpi = _pick(g, i), _pick(gp, i)
                for k, s in itertools.product((2, 3), (0.3, 0.7, 1.3)):
                    H0 = normal_form_map(NormalFormID(k, s, e))
                    c = classify(act(gi, gpi, H0, e), e)
                    count += 1
                    if c.id.family != k:
                        wrong.append((k, s, e, i))
                    worst["ds"] = max(worst["ds"], abs(c.id.s - s))
                    worst["jet"] = max(worst["jet"], jet_distance(jet_coordinates(c.result.normalized),
                                                                  jet_coordinates(H0)))
                    back = param_distance(compose_gamma(c.result.gamma, gi),
                                          compose_gamma_prime(c.result.gamma_p, gpi, e))
                    worst["inverse"] = max(worst["inverse"], back)
        ok = not wrong and worst["ds"] < 1e-6 and worst["jet"] < 1e-8 and worst["inverse"] < 1e-6
        return ok, {**worst, "misclassified": wrong, "classifications": count}
    return _timed(3, "normalization round-trip", 120, run)


def _pick(params, i):
    from dataclasses import fields, replace
    vals = {f.name: getattr(params, f.name) for f in fields(params)}
    return replace(params, **{k: (np.asarray(v)[i].item() if np.ndim(v) else v) for k, v in vals.items()})


def criterion_4() -> CriterionResult:
    def run():
        us = np.exp(2j * np.pi * np.arange(16) / 16)
        circle = max(stabilizer_residual(*rotation_pair(u), normal_form_map(NormalFormID(k, 0, e)).jets(4), e)
                     for k in (1, 2) for e in (1, -1) for u in us)
        refl = max(stabilizer_residual(*reflection_pair(), normal_form_map(NormalFormID(3, 0, e)).jets(4), e)
                   for e in (1, -1))
        found = []
        min_res = np.inf
        for k, s, e in itertools.product((2, 3), (0.1, 0.5, 1.0), (1, -1)):
            rep = random_stabilizer_search(normal_form_map(NormalFormID(k, s, e)), e)
            found += rep["nontrivial"]
            far = [f["residual"] for f in rep["refined"] if f["distance_from_trivial"] > 1e-4]
            min_res = min([min_res] + far)
        ok = circle < 1e-12 and refl < 1e-12 and not found
        return ok, {"circle_residual": circle, "reflection_residual": refl, "nontrivial_found": len(found),
                    "min_residual_away_from_trivial": float(min_res)}
    return _timed(4, "stabilizers", 60, run)


def criterion_5() -> CriterionResult:
    def run():
        rows = [rank_at_base(k, e, s0) for k in (2, 3) for e in (1, -1) for s0 in (0.1, 0.5, 1.0, 2.0)]
        ok = all(r["rank"] == 16 and r["rank_s_frozen"] == 15 and r["sigma_ratio"] >= 1e-6 for r in rows)
        return ok, {"ranks": [r["rank"] for r in rows], "frozen": [r["rank_s_frozen"] for r in rows],
                    "min_sigma_ratio": min(r["sigma_ratio"] for r in rows)}
    return _timed(5, "orbit rank", 30, run)


def criterion_6() -> CriterionResult:
    def run():
        rep = accumulation_search(NormalFormID(2, 0.5, -1), NormalFormID(3, 0.0, -1), raise_on_stall=False)
        try:
            ctrl = accumulation_search(NormalFormID(2, 0.5, 1), NormalFormID(3, 0.0, 1))
            stalled, ctrl_best = False, ctrl.best_distance
        except SearchStalled as exc:
            stalled, ctrl_best = True, exc.report.best_distance
        ok = rep.best_distance < 1e-2 and rep.all_source_family and stalled and ctrl_best > 0.05
        return ok, {"best_distance": rep.best_distance, "families": rep.families, "coincident": rep.coincident,
                    "control_best_distance": ctrl_best, "control_stalled": stalled}
    return _timed(6, "topological dichotomy", 600, run)


def criterion_7() -> CriterionResult:
    def run():
        grid = make_grid("polar:rmax=0.5,nr=10,ntheta=5")
        detail, ok = {}, True
        for k in (2, 3):
            recs = orbit_sweep(NormalFormID(k, 0.0, 1), grid)
            fams = sorted({r.classified.family for r in recs if r.valid})
            cov = s_coverage(recs, 0.0, 0.5)
            ok &= fams == [k] and cov["covered"] and cov["max_gap"] < 0.1
            detail[f"family_{k}"] = {"families": fams, **cov, "valid": sum(r.valid for r in recs)}
        return ok, detail
    return _timed(7, "eps=+1 orbit sweeps", 300, run)


def criterion_8() -> CriterionResult:
    def run():
        plus, minus = component_census(1), component_census(-1)
        return plus["count"] == 3 and minus["count"] == 2, {"eps_plus": plus["count"], "eps_minus": minus["count"]}
    return _timed(8, "component census", 60, run)


def kernel_properties(n: int = 1000, seed: int = DEFAULT_SEED) -> dict:
    """Seeded batch checks of the jet kernel: associativity, chain rule,
    inverse laws, and injectivity of jet coordinates on the catalog grid."""
    rng = np.random.default_rng(seed)
    K = 4

    def rand_map(scale):
        comps = []
        for _ in range(2):
            c = (rng.normal(size=(n, 15)) + 1j * rng.normal(size=(n, 15))) * scale
            c[:, 0] = 0
            comps.append(Jet(Jet.constant(0, 2, K).basis, c))
        return comps

    A, B, C = rand_map(0.5), rand_map(0.5), rand_map(0.5)
    comp = lambda o, i: [compose_jet(x, i) for x in o]  # noqa: E731
    lhs, rhs = comp(comp(A, B), C), comp(A, comp(B, C))
    assoc = max(float(np.max(np.abs(x.c - y.c))) for x, y in zip(lhs, rhs))

    AB = comp(A, B)
    jac = lambda m: np.stack([np.stack([j.coeff((1, 0)), j.coeff((0, 1))], -1) for j in m], -2)  # noqa: E731
    chain = float(np.max(np.abs(jac(AB) - jac(A) @ jac(B))))

    inverse = 0.0
    for eps in (1, -1):
        X = sample_box(n, eps, seed + 3 + (eps < 0))
        g, gp = params_from_chart(X, eps)
        idn = Jet.identity(2, K)
        back = sigma_jets(invert_gamma(g), sigma_jets(g, idn))
        inverse = max(inverse, max(float(np.max(np.abs(b.c - i.c))) for b, i in zip(back, idn)))
        idn3 = Jet.identity(3, K)
        back3 = sigma_prime_jets(invert_gamma_prime(gp, eps), eps, sigma_prime_jets(gp, eps, idn3))
        inverse = max(inverse, max(float(np.max(np.abs(b.c - i.c))) for b, i in zip(back3, idn3)))

    grid = [NormalFormID(1, 0.0, e) for e in (1, -1)]
    grid += [NormalFormID(k, round(0.1 * i, 10), e) for k in (2, 3) for i in range(21) for e in (1, -1)]
    inj = grid_injectivity(grid)
    return {"cases": n, "associativity": assoc, "chain_rule": chain, "inverse": inverse, **inj}


def grid_injectivity(grid: list[NormalFormID], tol: float = 1e-6) -> dict:
    """Pairwise jet distances on a catalog grid.

    A pair closer than ``tol`` is a violation unless the two labels denote the
    same rational map (checked pointwise at generic points of C^2); such pairs
    are reported as coincident labels.
    """
    rng = np.random.default_rng(DEFAULT_SEED)
    z = 0.3 * (rng.normal(size=200) + 1j * rng.normal(size=200))
    w = 0.3 * (rng.normal(size=200) + 1j * rng.normal(size=200))
    maps = [normal_form_map(nf) for nf in grid]
    V = np.array([jet_coordinates(m).values for m in maps])
    min_sep, coincident, violations = np.inf, [], []
    for i, j in itertools.combinations(range(len(grid)), 2):
        if grid[i].eps != grid[j].eps:
            continue
        d = float(np.linalg.norm(V[i] - V[j]))
        if d > tol:
            min_sep = min(min_sep, d)
            continue
        same = max(float(np.max(np.abs(a - b))) for a, b in zip(maps[i](z, w), maps[j](z, w))) < 1e-12
        (coincident if same else violations).append([grid[i].label(), grid[j].label(), d])
    return {"min_grid_separation": min_sep, "coincident_labels": coincident, "violations": violations}


def criterion_9() -> CriterionResult:
    def run():
        d = kernel_properties()
        ok = (d["associativity"] < 1e-10 and d["chain_rule"] < 1e-12 and d["inverse"] < 1e-10
              and d["min_grid_separation"] > 1e-6 and not d["violations"])
        return ok, d
    return _timed(9, "algebra kernel properties", 60, run)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}


def run_all(which=None) -> list[CriterionResult]:
    return [CRITERIA[i]() for i in (which or sorted(CRITERIA))]
