"""Explicit maps: the normal forms G_{k,s,eps} and the sphere-model list H_1..H_7."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import CPoly, Jet, RationalMapGerm
from .errors import InvalidSignature, OrderExceeded, OrderMismatch
from .hypersurfaces import SourcePoint, check_eps, sphere_to_heisenberg
from .isotropies import orient_transversal, recenter

I = 1j


@dataclass(frozen=True)
class NormalFormID:
    family: int
    s: float
    eps: int

    def __post_init__(self):
        if self.family not in (1, 2, 3):
            raise ValueError(f"family must be 1, 2 or 3, got {self.family}")
        if self.s < 0:
            raise ValueError("s must be nonnegative")
        if self.family == 1 and self.s != 0:
            raise ValueError("family 1 carries no parameter (s must be 0)")
        check_eps(self.eps)

    def to_json(self) -> dict:
        return {"family": self.family, "s": self.s, "eps": self.eps}

    def label(self) -> str:
        sign = "+" if self.eps == 1 else "-"
        return f"G1{sign}" if self.family == 1 else f"G{self.family},{self.s:g}{sign}"


def normal_form_map(nf: NormalFormID) -> RationalMapGerm:
    z, w = CPoly.variables(2)
    e, s = nf.eps, float(nf.s)
    if nf.family == 1:
        return RationalMapGerm.from_polys([2 * z * (2 + I * e * w), 4 * z ** 2, 4 * w], 4 - w ** 2)
    if nf.family == 2:
        den = 4 - 4 * e * s * z - I * (e + s ** 2) * w - 2 * I * s * z * w - e * s ** 2 * w ** 2
        return RationalMapGerm.from_polys([
            4 * z - 4 * e * s * z ** 2 + I * (e - s ** 2) * z * w + s * w ** 2,
            4 * z ** 2 + s ** 2 * w ** 2,
            w * (4 - 4 * e * s * z - I * (e + s ** 2) * w),
        ], den)
    den = (256 * e - 32 * I * w + 64 * z ** 2 - 192 * I * e * s * z * w - (17 * e + 144 * s ** 2) * w ** 2
           + 32 * I * e * z ** 2 * w + 24 * s * z * w ** 2 + I * w ** 3)
    return RationalMapGerm.from_polys([
        256 * e * z + 96 * I * z * w + 64 * e * s * w ** 2 + 64 * z ** 3 + 64 * I * e * s * z ** 2 * w
        - 3 * (3 * e - 16 * s ** 2) * z * w ** 2 + 4 * I * s * w ** 3,
        256 * e * z ** 2 - 16 * w ** 2 + 256 * s * z ** 3 + 16 * I * z ** 2 * w - 16 * e * s * z * w ** 2 - I * e * w ** 3,
        w * (256 * e - 32 * I * w + 64 * z ** 2 - 64 * I * e * s * z * w - (e + 16 * s ** 2) * w ** 2),
    ], den)


def G(family: int, s: float = 0.0, eps: int = 1) -> RationalMapGerm:
    return normal_form_map(NormalFormID(family, s, eps))


FARAN_LEBL_DEGENERATE = 7


def faran_lebl_map(index: int, eps) -> RationalMapGerm:
    """Sphere-model maps S^2 -> Q_eps; indices 5-7 exist only for eps = -1.

    Index 7 is a family over an arbitrary nonconstant h; the representative
    h(z, w) = w is used (degenerate, not in F^2 after conjugation).
    """
    e = check_eps(eps)
    if index in (5, 6, 7) and e != -1:
        raise InvalidSignature(f"map ({index}) requires eps = -1")
    z, w = CPoly.variables(2)
    one = CPoly.constant(1, 2)
    r2, r3 = np.sqrt(2.0), np.sqrt(3.0)
    if index == 1:
        return RationalMapGerm.from_polys([z, w, CPoly({}, 2)], one)
    if index == 2:
        return RationalMapGerm.from_polys([z ** 2, (1 - e + z * (1 + e)) * w * (1 / r2), w ** 2], one)
    if index == 3:
        return RationalMapGerm.from_polys([2 * z * z, (1 - e + z ** 2 * (1 + e)) * w, (1 - e + z * (1 + e)) * w ** 2],
                                          2 * z, check=False)
    if index == 4:
        den = 1 + 3 * e + 3 * (1 - e) * w ** 2
        return RationalMapGerm.from_polys([
            4 * z ** 3, (3 * (1 - e) + (1 + 3 * e) * w ** 2) * w, r3 * (1 - e + 2 * (1 + e) * w + (1 - e) * w ** 2) * z,
        ], den, check=False)
    if index == 5:
        den = 1 + r2 * z + w
        return RationalMapGerm.from_polys([(2 + r2 * z) * z, w * den, (1 + r2 * z - w) * z], den)
    if index == 6:
        return RationalMapGerm.from_polys([(1 - w) * z, 1 + w - w ** 2, (1 + w) * z], 1 - w - w ** 2)
    if index == 7:
        return RationalMapGerm.from_polys([one, w, w], one)
    raise ValueError(f"index must be in 1..7, got {index}")


# --------------------------------------------------------------------------
# jet coordinates
# --------------------------------------------------------------------------

JET_LABELS = (
    [f"H_z[{i}]" for i in range(3)] + [f"H_w[{i}]" for i in range(3)]
    + [f"H_z2[{i}]" for i in range(3)] + [f"H_zw[{i}]" for i in range(3)]
    + [f"H_w2[{i}]" for i in range(3)] + [f"f_z2w[{i}]" for i in range(2)]
)
_DERIVS = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@dataclass(frozen=True)
class JetCoords:
    """The 17 derivative values {j_0^2(H), f_{z^2 w}(0)} (vector ``values``).

    ``values`` may carry leading batch axes.
    """

    values: np.ndarray
    order: int

    def __getitem__(self, label: str):
        return self.values[..., JET_LABELS.index(label)]

    def to_json(self) -> dict:
        v = np.asarray(self.values)
        return {"order": self.order, "labels": JET_LABELS, "values": [[float(x.real), float(x.imag)] for x in v]}

    def as_real(self) -> np.ndarray:
        v = np.asarray(self.values)
        return np.concatenate([v.real, v.imag], axis=-1)


def jet_coords_from_jets(jets: list[Jet]) -> JetCoords:
    if jets[0].order < 3:
        raise OrderExceeded("jet coordinates need jets of order >= 3")
    vals = [j.derivative(d) for d in _DERIVS for j in jets]
    vals += [jets[0].derivative((2, 1)), jets[1].derivative((2, 1))]
    return JetCoords(np.stack(np.broadcast_arrays(*vals), axis=-1), jets[0].order)


def jet_coordinates(H: RationalMapGerm, order: int = 4) -> JetCoords:
    return jet_coords_from_jets(H.jets(order))


def jet_distance(a: JetCoords, b: JetCoords):
    if a.order != b.order:
        raise OrderMismatch(f"jet orders differ: {a.order} vs {b.order}")
    d = np.linalg.norm(np.asarray(a.values) - np.asarray(b.values), axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def catalog_entries() -> list[dict]:
    """Metadata table for ``catalog list``."""
    rows = []
    for e in (1, -1):
        rows.append({"name": f"G1{'+' if e == 1 else '-'}", "family": 1, "parameter": None, "eps": e,
                     "model": "Heisenberg", "in_F2": True})
        for k in (2, 3):
            rows.append({"name": f"G{k},s{'+' if e == 1 else '-'}", "family": k, "parameter": "s >= 0", "eps": e,
                         "model": "Heisenberg", "in_F2": True})
    for idx in range(1, 8):
        for e in ((1, -1) if idx <= 4 else (-1,)):
            rows.append({"name": f"H{idx}{'+' if e == 1 else '-'}", "index": idx, "eps": e, "model": "sphere",
                         "note": "degenerate, not in F2 (h = w)" if idx == FARAN_LEBL_DEGENERATE else ""})
    return rows


def faran_lebl_germ(index: int, eps, p: SourcePoint) -> RationalMapGerm:
    """Sphere-model map moved to the Heisenberg models and recentered at ``p``.

    For eps = -1 the germ is composed with the sign-reversing isotropy of the
    target when needed so that g_w(0) > 0.
    """
    H = sphere_to_heisenberg(faran_lebl_map(index, eps), eps)
    return orient_transversal(recenter(H, p, eps), eps)
