"""Great-circle geometry on a spherical Earth."""

from __future__ import annotations

import math

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Haversine distance in meters between two (lat, lon) points in degrees.

    Scalar on purpose: graph construction and its oracles both call this so
    that inclusion at ``d == R_int`` is decided by the same floating-point
    path everywhere.
    """
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    dphi = p2 - p1
    dlmb = math.radians(lon2 - lon1)
    s1 = math.sin(dphi * 0.5)
    s2 = math.sin(dlmb * 0.5)
    a = s1 * s1 + math.cos(p1) * math.cos(p2) * s2 * s2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, a)))


def haversine_many(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorized haversine for analysis code (not used for edge decisions)."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi * 0.5) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb * 0.5) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(1.0, a)))


def destination(lat: float, lon: float, bearing_rad: float, dist_m: float) -> tuple[float, float]:
    """Point reached from (lat, lon) after travelling ``dist_m`` along a bearing."""
    delta = dist_m / EARTH_RADIUS_M
    p1 = math.radians(lat)
    l1 = math.radians(lon)
    sin_p2 = math.sin(p1) * math.cos(delta) + math.cos(p1) * math.sin(delta) * math.cos(bearing_rad)
    p2 = math.asin(max(-1.0, min(1.0, sin_p2)))
    l2 = l1 + math.atan2(
        math.sin(bearing_rad) * math.sin(delta) * math.cos(p1),
        math.cos(delta) - math.sin(p1) * sin_p2,
    )
    lon2 = (math.degrees(l2) + 540.0) % 360.0 - 180.0
    return math.degrees(p2), lon2


def local_projection(lat: np.ndarray, lon: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Equirectangular meters east/north of the centroid.

    Returns ``(x, y, stretch)`` where ``stretch >= 1`` bounds how much the
    projection can exaggerate an east-west separation relative to the true
    distance anywhere in the corpus; grid cells are widened by it.
    """
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    if lat.size == 0:
        return np.empty(0), np.empty(0), 1.0
    lat0 = float(lat.mean())
    lon0 = float(lon.mean())
    c0 = math.cos(math.radians(lat0))
    x = EARTH_RADIUS_M * np.radians(lon - lon0) * c0
    y = EARTH_RADIUS_M * np.radians(lat - lat0)
    cmin = math.cos(math.radians(min(89.9, float(np.abs(lat).max()))))
    stretch = max(1.0, c0 / cmin)
    return x, y, stretch
