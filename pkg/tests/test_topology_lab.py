import numpy as np
import pytest

from crmaps.catalog import G, NormalFormID, jet_coordinates
from crmaps.errors import SearchStalled
from crmaps.hypersurfaces import SourcePoint
from crmaps.topology_lab import (CSV_COLUMNS, accumulation_search, component_census, continuity_study, curve_point,
                                 family_gap, make_grid, nearest_on_family, orbit_sweep, quotient_topology_probe,
                                 s_coverage, sweep_point)


class TestCurves:
    @pytest.mark.parametrize("k", [2, 3])
    @pytest.mark.parametrize("eps", [1, -1])
    def test_closed_form_matches_catalog(self, k, eps):
        for s in (0.05, 0.5, 1.7, 4.0):
            assert np.max(np.abs(curve_point(k, eps, s) - jet_coordinates(G(k, s, eps)).values)) < 1e-11

    def test_nearest_recovers_s(self):
        s, d = nearest_on_family(jet_coordinates(G(3, 0.83, 1)).values, 3, 1)
        assert abs(s - 0.83) < 1e-9 and d < 1e-9

    def test_families_meet_only_for_negative_signature(self):
        grid = np.linspace(0, 2, 2001)
        d_minus, s2, s3 = family_gap(2, 3, -1, grid)
        assert d_minus < 1e-12 and abs(s2 - 0.5) < 1e-9 and abs(s3 - 0.5) < 1e-9
        assert family_gap(2, 3, 1, grid)[0] > 0.05

    def test_continuity_refinement(self):
        steps = [r["max_step"] for r in continuity_study(2, 1)]
        # the curve is Lipschitz in s: halving ds halves the largest jet step
        assert all(0.4 < b / a < 0.6 for a, b in zip(steps, steps[1:]))


class TestGrid:
    def test_kinds(self):
        assert len(make_grid("polar:rmax=0.5,nr=10,ntheta=5")) == 50
        ray = make_grid("ray:angle=0,rmax=0.7,n=8,u=0.1")
        assert len(ray) == 8 and ray[-1].z == pytest.approx(0.7) and ray[0].u == 0.1
        assert len(make_grid("box:rmax=0.2,n=3,umax=0.1")) == 27

    def test_unknown(self):
        with pytest.raises(ValueError):
            make_grid("spiral:n=3")


class TestSweeps:
    def test_origin_is_base(self):
        base = NormalFormID(3, 0.4, -1)
        rec = sweep_point(base, SourcePoint(0j, 0.0))
        assert rec.classified.family == 3 and abs(rec.classified.s - 0.4) < 1e-10
        assert rec.certificate < 1e-12 and rec.flags == ["ok"]
        assert list(rec.to_row()) == CSV_COLUMNS

    @pytest.mark.parametrize("k", [2, 3])
    def test_plus_sweeps_keep_family(self, k):
        recs = orbit_sweep(NormalFormID(k, 0.0, 1), make_grid("polar:rmax=0.5,nr=10,ntheta=5"))
        valid = [r for r in recs if r.valid]
        assert len(recs) == 50 and {r.classified.family for r in valid} == {k}
        cov = s_coverage(recs, 0.0, 0.5)
        assert cov["covered"] and cov["max_gap"] < 0.1

    def test_validity_near_origin(self):
        recs = orbit_sweep(NormalFormID(2, 0.3, -1), make_grid("polar:rmax=0.3,nr=6,ntheta=6"))
        assert sum(r.valid for r in recs) >= 0.95 * len(recs)
        assert all(r.valid or r.flags[0].startswith("OutOfClass") for r in recs)

    def test_refinement_keeps_families(self):
        base = NormalFormID(3, 0.0, -1)
        coarse = orbit_sweep(base, make_grid("ray:rmax=0.9,n=4"))
        fine = orbit_sweep(base, make_grid("ray:rmax=0.9,n=7"))
        by_p = {complex(r.p.z): r for r in fine}
        assert len(fine) <= 2 * len(coarse)
        for r in coarse:
            other = by_p.get(complex(r.p.z))
            if other is not None and r.valid and other.valid:
                assert other.classified.family == r.classified.family

    def test_minus_family3_curve_reaches_the_crossing(self):
        recs = orbit_sweep(NormalFormID(3, 0.0, -1), make_grid("ray:rmax=1.2,n=25"))
        s = [r.classified.s for r in recs if r.valid]
        assert max(s) > 0.5 and any("oriented" in r.flags for r in recs)

    def test_eps_mismatch(self):
        with pytest.raises(ValueError):
            orbit_sweep(NormalFormID(2, 0.1, 1), [], eps=-1)


class TestAccumulation:
    def test_same_orbit_sanity(self):
        t = NormalFormID(2, 0.5, -1)
        rep = accumulation_search(t, t, n_grid=2, steps=5)
        assert rep.best_distance < 1e-10

    def test_plus_control_stalls(self):
        with pytest.raises(SearchStalled) as info:
            accumulation_search(NormalFormID(2, 0.5, 1), NormalFormID(3, 0.0, 1), n_grid=6, steps=40)
        rep = info.value.report
        assert rep.best_distance > 0.05 and rep.all_source_family
        best = [t[1] for t in rep.trace]
        assert all(b <= a for a, b in zip(best, best[1:]))

    def test_signature_mismatch(self):
        with pytest.raises(ValueError):
            accumulation_search(NormalFormID(2, 0.5, 1), NormalFormID(3, 0.0, -1))


class TestCensus:
    def test_counts(self):
        assert component_census(1)["count"] == 3
        rep = component_census(-1)
        assert rep["count"] == 2
        assert rep["joins"] and rep["joins"][0]["families"] == [2, 3]

    def test_probe(self):
        rep = quotient_topology_probe(-1)
        assert rep["continuous"] and not rep["curves_separated"]
        assert quotient_topology_probe(1)["curves_separated"]
