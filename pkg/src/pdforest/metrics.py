"""Linear metrics mapping one cube to a sparse {feature subset: value} map.

Every metric here is linear: its value on a weighted cube is the weight
times its value on the unit cube, so the engine may evaluate it per cube
and sum.  Subset keys are sorted, duplicate-free integer tuples so maps
from different leaves merge deterministically.
"""

from __future__ import annotations

from itertools import combinations

from .engine import Cube

SubsetValueMap = dict  # {tuple[int, ...]: float}


class CubeMetric:
    """Behavioral contract for a linear metric over cubes.

    ``max_positive_arity`` declares the largest ``|S+|`` that can produce
    a non-empty map; cubes above it may be skipped by the engine.  None
    means unbounded.
    """

    max_positive_arity: int | None = None

    def cube_values(self, s_plus: frozenset, s_minus: frozenset) -> SubsetValueMap:
        raise NotImplementedError


class CpdvMetric(CubeMetric):
    """Centered partial dependence contribution of a unit cube.

    A feature gains +1 when it is the cube's only positive literal and -1
    when it appears negated in a cube with no positive literals; anything
    else contributes nothing.  Only singleton keys are ever emitted, which
    is what restores the null-player property that plain (uncentered)
    dependence values violate.
    """

    max_positive_arity = 1

    def cube_values(self, s_plus, s_minus):
        if s_plus & s_minus:
            return {}
        out: SubsetValueMap = {}
        if len(s_plus) == 1:
            (f,) = s_plus
            out[(f,)] = 1.0
        elif not s_plus:
            for f in s_minus:
                out[(f,)] = -1.0
        return out


class PdivMetric(CubeMetric):
    """All-order interaction contributions of a unit cube.

    A cube touches exactly the subsets X with S+ <= X <= S+ | S-, each
    with value (-1)^(|X| - |S+|).  Unsatisfiable cubes (a variable both
    positive and negated) are discarded.
    """

    max_positive_arity = None

    def cube_values(self, s_plus, s_minus):
        if s_plus & s_minus:
            return {}
        base = tuple(sorted(s_plus))
        neg = sorted(s_minus)
        out: SubsetValueMap = {}
        for r in range(len(neg) + 1):
            sign = 1.0 if r % 2 == 0 else -1.0
            for extra in combinations(neg, r):
                key = tuple(sorted(base + extra))
                out[key] = sign
        return out


class PdivUpToPairsMetric(CubeMetric):
    """Interaction contributions restricted to singleton and pair subsets.

    The empty subset is not emitted; pipelines that need it replace it
    with the directly computed mean prediction.
    """

    max_positive_arity = 2

    def cube_values(self, s_plus, s_minus):
        if s_plus & s_minus or len(s_plus) > 2:
            return {}
        full = PdivMetric().cube_values(s_plus, s_minus)
        return {k: v for k, v in full.items() if 1 <= len(k) <= 2}


def _scaled(metric: CubeMetric, cube: Cube) -> SubsetValueMap:
    unit = metric.cube_values(cube.s_plus, cube.s_minus)
    if cube.weight == 1.0:
        return unit
    return {k: cube.weight * v for k, v in unit.items()}


def cpdv_metric(cube: Cube) -> SubsetValueMap:
    return _scaled(CpdvMetric(), cube)


def pdiv_metric(cube: Cube) -> SubsetValueMap:
    return _scaled(PdivMetric(), cube)


def pdiv_order_le2_metric(cube: Cube) -> SubsetValueMap:
    return _scaled(PdivUpToPairsMetric(), cube)
