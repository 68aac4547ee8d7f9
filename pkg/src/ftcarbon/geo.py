"""Great-circle distances for flight-equivalence routes."""

import math

EARTH_RADIUS_KM = 6371.0088  # IUGG mean radius

# (latitude, longitude) in decimal degrees, city centres
CITIES = {
    "paris": (48.8566, 2.3522),
    "london": (51.5074, -0.1278),
    "kolkata": (22.5726, 88.3639),
    "dehradun": (30.3165, 78.0322),
}


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float,
                 radius_km: float = EARTH_RADIUS_KM) -> float:
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * radius_km * math.asin(min(1.0, math.sqrt(h)))


def city_distance_km(a: str, b: str) -> float:
    return haversine_km(*CITIES[a.lower()], *CITIES[b.lower()])
