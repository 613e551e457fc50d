"""Named example systems used by tests, scripts and the command line."""
from __future__ import annotations

from .errors import InputError
from .ifs import IfsSystem
from .maps import ConformalIntervalMap, SimilarityMap
from .rational import Q


def tri_overlap(p=("1/3", "1/3", "1/3")) -> IfsSystem:
    """x/4, x/4 + 1/8, x/4 + 3/4 on [0,1]: the first two images overlap."""
    maps = [SimilarityMap.line("1/4", t) for t in ("0", "1/8", "3/4")]
    return IfsSystem(tuple(maps), tuple(p))


def dyadic(p0="2/5") -> IfsSystem:
    """x/2 and (x+1)/2 with weights (p₀, 1−p₀): a Bernoulli measure on [0,1]."""
    p0 = Q(p0)
    if not 0 < p0 < 1:
        raise InputError("p0 must lie in (0,1)")
    maps = (SimilarityMap.line("1/2", 0), SimilarityMap.line("1/2", "1/2"))
    return IfsSystem(maps, (p0, 1 - p0))


def cantor(p=("1/2", "1/2")) -> IfsSystem:
    maps = (SimilarityMap.line("1/3", 0), SimilarityMap.line("1/3", "2/3"))
    return IfsSystem(maps, tuple(p))


def four_map_plane(p=("1/4", "1/4", "1/4", "1/4")) -> IfsSystem:
    """Ratio 1/2 maps of the plane with translations (0,0), (1/2,0), (0,1/2), (1/4,1/4)."""
    shifts = ((0, 0), ("1/2", 0), (0, "1/2"), ("1/4", "1/4"))
    maps = tuple(SimilarityMap.plane("1/2", t) for t in shifts)
    return IfsSystem(maps, tuple(p))


def moebius_pair(p=("1/2", "1/2")) -> IfsSystem:
    """x/(x+3) and (2x+1)/(x+5) on [0,1]; the images [0,1/4] and [1/5,1/2] overlap."""
    dom = (0, 1)
    maps = (
        ConformalIntervalMap("moebius", (1, 0, 1, 3), dom, holder_constant="1/4"),
        ConformalIntervalMap("moebius", (2, 1, 1, 5), dom, holder_constant="1/4"),
    )
    return IfsSystem(maps, tuple(p))


SYSTEMS = {
    "tri-overlap": tri_overlap,
    "dyadic": dyadic,
    "cantor": cantor,
    "four-map-plane": four_map_plane,
    "moebius-pair": moebius_pair,
}


def named(name: str, **kwargs) -> IfsSystem:
    try:
        factory = SYSTEMS[name]
    except KeyError:
        raise InputError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None
    return factory(**kwargs)
