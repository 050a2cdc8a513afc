from typing import NamedTuple, Optional

import numpy as np

from pywex.model import GridError
from pywex.routes.grid import DensityGrid, aggregate
from pywex.routes.master import ProbabilityField
from pywex.harness.binning import project_field


class Distance(NamedTuple):
    tv: float
    "Total variation: half the sum of absolute mass differences, over every part of the law."
    l1: float
    "L1 distance between the continuous parts."
    ks: Optional[float] = None
    "Kolmogorov-Smirnov distance, for laws on the line only."

    def to_dict(self) -> dict:
        return {"tv": self.tv, "l1": self.l1, "ks": self.ks}


def _common_grids(p: DensityGrid, q: DensityGrid) -> tuple[DensityGrid, DensityGrid]:
    if p.dims != q.dims or abs(p.length - q.length) > 1e-9 * max(1.0, p.length):
        raise GridError("Les deux lois ne sont pas définies sur le même domaine.")
    if abs(p.spacing - q.spacing) <= 1e-12 * p.spacing:
        return p, q
    fine, coarse = (p, q) if p.spacing < q.spacing else (q, p)
    ratio = coarse.spacing / fine.spacing
    factor = round(ratio)
    if abs(ratio - factor) > 1e-9 * ratio:
        raise GridError(f"Les pas {p.spacing:g} et {q.spacing:g} ne sont pas multiples l'un de l'autre.")
    fine = aggregate(fine, factor)
    return (fine, coarse) if p.spacing < q.spacing else (coarse, fine)


def _field_distance(p: ProbabilityField, q: ProbabilityField) -> Distance:
    delta = p.mass - q.mass
    tv = 0.5 * float(np.abs(delta).sum())
    inside = (p.space.units > 0).all(axis=1)
    l1 = float(np.abs(delta[inside]).sum())
    ks = None
    if p.space.n == 2:
        order = np.argsort(p.space.units[:, 0], kind="stable")
        ks = float(np.abs(np.cumsum(delta[order])).max())
    return Distance(tv, l1, ks)


def distance(p: DensityGrid | ProbabilityField, q: DensityGrid | ProbabilityField,
             spacing: Optional[float] = None) -> Distance:
    """
    Distances between two laws. Fields over the same state space are compared state by state; everything
    else is compared on a grid, the finer law being aggregated onto the coarser one.
    """
    if isinstance(p, ProbabilityField) and isinstance(q, ProbabilityField):
        if p.space is q.space and spacing is None:
            return _field_distance(p, q)
        if spacing is None:
            raise GridError("Deux champs sur des réseaux différents demandent un pas de comparaison.")
    if isinstance(p, ProbabilityField):
        p = project_field(p, spacing if spacing is not None else q.spacing)
    if isinstance(q, ProbabilityField):
        q = project_field(q, spacing if spacing is not None else p.spacing)

    p, q = _common_grids(p, q)
    if spacing is not None and abs(p.spacing - spacing) > 1e-12 * spacing:
        factor = round(spacing / p.spacing)
        p, q = aggregate(p, factor), aggregate(q, factor)

    parts_p, parts_q = p.mass_layout(), q.mass_layout()
    tv = 0.5 * sum(float(np.abs(parts_p[k] - parts_q[k]).sum()) for k in parts_p)
    l1 = float(np.abs(parts_p["interior"] - parts_q["interior"]).sum())
    ks = None
    if p.dims == 1:
        def ordered(parts):
            return np.concatenate([[parts["atoms"][0]], parts["interior"], [parts["atoms"][1]]])
        ks = float(np.abs(np.cumsum(ordered(parts_p) - ordered(parts_q))).max())
    return Distance(tv, l1, ks)


def units_moments(units: np.ndarray, step: float, weights: Optional[np.ndarray] = None,
                  interior_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """
    Mean and covariance of the reduced coordinates (all agents but the last) of weighted lattice states,
    equally weighted by default. With ``interior_only``, states with a bankrupt agent are left out and the
    remaining weights renormalised.
    """
    units = np.atleast_2d(units)
    weights = np.ones(units.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    if interior_only:
        keep = (units > 0).all(axis=1)
        units, weights = units[keep], weights[keep]
    total = weights.sum()
    if units.shape[0] == 0 or total <= 0:
        raise GridError("Aucun état pour calculer les moments.")
    weights = weights / total
    reduced = units[:, :-1] * step
    mean = weights @ reduced
    centered = reduced - mean
    return mean, (centered * weights[:, None]).T @ centered
