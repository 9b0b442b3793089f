"""Great-circle distances and nearest-county ordering."""

import numpy as np

EARTH_RADIUS_KM = 6371.0


def haversine_km(lat1, lon1, lat2, lon2):
    """Haversine distance in kilometres; broadcasts over array arguments."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(a, dtype=float)) for a in (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def fips_ranks(fips):
    """Rank of each FIPS code in ascending order, used as the distance tie-breaker."""
    order = np.argsort(np.asarray(fips, dtype=str), kind="stable")
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(len(order))
    return ranks


def neighbor_order(coords, ranks, i):
    """Indices of every county except ``i`` sorted by (distance to i, FIPS).

    Returns the index array and the matching distances.
    """
    d = haversine_km(coords[i, 0], coords[i, 1], coords[:, 0], coords[:, 1])
    order = np.lexsort((ranks, d))
    order = order[order != i]
    return order, d[order]
