"""Router-record ingestion: parsing, cleaning, layout randomization and
security-profile assignment, plus a synthetic city generator.

Pipeline order is fixed::

    parse_records -> filter_probes -> dedupe_and_cap
        -> randomize_positions -> assign_profiles
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .geo import EARTH_RADIUS_M, destination

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("bssid", "lat", "lon", "type", "encryption")
# Above this share of malformed rows the whole file is rejected.
MAX_BAD_ROW_FRACTION = 0.10


class RecordKind(str, enum.Enum):
    INFRASTRUCTURE = "infra"
    PROBE = "probe"


class Encryption(str, enum.Enum):
    OPEN = "none"
    WEP = "wep"
    WPA = "wpa"


class PasswordTier(enum.IntEnum):
    DEFAULT = 0
    IN_DICT1 = 1
    IN_DICT2 = 2
    UNCRACKABLE = 3


_KIND_ALIASES = {
    "infra": RecordKind.INFRASTRUCTURE,
    "infrastructure": RecordKind.INFRASTRUCTURE,
    "bss": RecordKind.INFRASTRUCTURE,
    "probe": RecordKind.PROBE,
}
_ENC_ALIASES = {
    "none": Encryption.OPEN,
    "open": Encryption.OPEN,
    "": Encryption.OPEN,
    "wep": Encryption.WEP,
    "wpa": Encryption.WPA,
    "wpa2": Encryption.WPA,
}


@dataclass(frozen=True)
class RouterRecord:
    bssid: str
    lat: float
    lon: float
    kind: RecordKind = RecordKind.INFRASTRUCTURE
    encryption: Encryption = Encryption.OPEN

    def __post_init__(self):
        if not self.bssid:
            raise ValueError("bssid must be non-empty")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")

    @property
    def encrypted(self) -> bool:
        return self.encryption is not Encryption.OPEN


@dataclass(frozen=True)
class IngestConfig:
    overlap_cap: int = 20
    randomization_radius_m: float = 10.0
    wpa_fraction_of_encrypted: float = 0.30
    nopass_fraction_of_open: float = 0.50
    dict1_fraction: float = 0.25
    dict2_fraction: float = 0.11
    rng_seed: int = 0

    def __post_init__(self):
        if self.overlap_cap < 1:
            raise ValueError("overlap_cap must be >= 1")
        if self.randomization_radius_m < 0:
            raise ValueError("randomization_radius_m must be >= 0")
        for name in ("wpa_fraction_of_encrypted", "nopass_fraction_of_open",
                     "dict1_fraction", "dict2_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.dict1_fraction + self.dict2_fraction > 1.0 + 1e-12:
            raise ValueError("dict1_fraction + dict2_fraction must not exceed 1")


@dataclass(frozen=True)
class NodeProfile:
    node_id: int
    lat: float
    lon: float
    encryption: Encryption
    password_tier: PasswordTier

    @property
    def position(self) -> tuple[float, float]:
        return (self.lat, self.lon)


@dataclass
class RowError:
    line: int
    message: str


@dataclass
class ParseReport:
    """Side information collected while parsing."""

    errors: list[RowError] = field(default_factory=list)
    unknown_encryption: int = 0
    rows: int = 0


class IngestError(ValueError):
    pass


def parse_records(stream: IO[str] | IO[bytes] | str, delimiter: str = ",",
                  report: ParseReport | None = None) -> list[RouterRecord]:
    """Parse delimited router records.

    ``stream`` may be a text or binary file object, or the text itself.
    Malformed rows are collected into ``report.errors``; the call fails
    only when the header lacks a required column or when more than 10% of
    the data rows are malformed.
    """
    if report is None:
        report = ParseReport()
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    else:
        head = stream.read(0)
        if isinstance(head, bytes):
            stream = io.TextIOWrapper(stream, encoding="utf-8", newline="")

    reader = csv.reader(stream, delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("input is empty: header row required") from None
    header = [h.strip().lower() for h in header]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise IngestError(f"missing required column(s): {', '.join(missing)}")
    col = {name: header.index(name) for name in REQUIRED_COLUMNS}

    records: list[RouterRecord] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        report.rows += 1
        try:
            kind_raw = row[col["type"]].strip().lower()
            kind = _KIND_ALIASES.get(kind_raw)
            if kind is None:
                raise ValueError(f"unknown record type {kind_raw!r}")
            enc_raw = row[col["encryption"]].strip().lower()
            enc = _ENC_ALIASES.get(enc_raw)
            if enc is None:
                report.unknown_encryption += 1
                enc = Encryption.OPEN
            rec = RouterRecord(
                bssid=row[col["bssid"]].strip(),
                lat=float(row[col["lat"]]),
                lon=float(row[col["lon"]]),
                kind=kind,
                encryption=enc,
            )
        except (IndexError, ValueError) as exc:
            report.errors.append(RowError(line_no, str(exc)))
            continue
        records.append(rec)

    if report.unknown_encryption:
        log.warning("%d record(s) with unknown encryption mapped to open",
                    report.unknown_encryption)
    if report.rows and len(report.errors) > MAX_BAD_ROW_FRACTION * report.rows:
        first = report.errors[0]
        raise IngestError(
            f"{len(report.errors)} of {report.rows} rows malformed "
            f"(first at line {first.line}: {first.message})"
        )
    for err in report.errors:
        log.warning("line %d skipped: %s", err.line, err.message)
    return records


def write_records(records: Iterable[RouterRecord], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REQUIRED_COLUMNS)
    for r in records:
        writer.writerow([r.bssid, repr(r.lat), repr(r.lon), r.kind.value, r.encryption.value])


def filter_probes(records: Sequence[RouterRecord]) -> list[RouterRecord]:
    return [r for r in records if r.kind is not RecordKind.PROBE]


def dedupe_and_cap(records: Sequence[RouterRecord], overlap_cap: int = 20) -> list[RouterRecord]:
    """Drop repeated BSSIDs, then keep at most ``overlap_cap`` routers per
    exact (lat, lon) fix, first come first kept."""
    if overlap_cap < 1:
        raise ValueError("overlap_cap must be >= 1")
    seen: set[str] = set()
    per_site: dict[tuple[float, float], int] = {}
    out = []
    for r in records:
        if r.bssid in seen:
            continue
        seen.add(r.bssid)
        site = (r.lat, r.lon)
        n = per_site.get(site, 0)
        if n >= overlap_cap:
            continue
        per_site[site] = n + 1
        out.append(r)
    return out


def randomize_positions(records: Sequence[RouterRecord], radius_m: float,
                        rng: np.random.Generator) -> list[RouterRecord]:
    """Move each router to a uniform random point of the disk of radius
    ``radius_m`` around its recorded fix."""
    if radius_m < 0:
        raise ValueError("randomization radius must be >= 0")
    n = len(records)
    if radius_m == 0 or n == 0:
        return list(records)
    u = rng.random((n, 2))
    out = []
    for rec, (ua, ur) in zip(records, u):
        # sqrt gives radial density proportional to r
        dist = radius_m * math.sqrt(ur)
        lat, lon = destination(rec.lat, rec.lon, 2.0 * math.pi * ua, dist)
        out.append(RouterRecord(rec.bssid, lat, lon, rec.kind, rec.encryption))
    return out


def assign_profiles(records: Sequence[RouterRecord], config: IngestConfig,
                    rng: np.random.Generator) -> list[NodeProfile]:
    """Draw the latent security attributes of every router.

    Encrypted routers become WPA with probability
    ``wpa_fraction_of_encrypted`` and WEP otherwise. Open routers keep the
    factory password with probability ``nopass_fraction_of_open``. Every
    router that is not on a factory password (WEP routers included) gets
    a fixed crackability tier, so a password that resisted one attacker
    resists all of them.
    """
    n = len(records)
    u = rng.random((n, 2))
    d1 = config.dict1_fraction
    d12 = d1 + config.dict2_fraction
    profiles = []
    for i, (rec, (u_cls, u_tier)) in enumerate(zip(records, u)):
        if rec.encrypted:
            enc = Encryption.WPA if u_cls < config.wpa_fraction_of_encrypted else Encryption.WEP
            default_pw = False
        else:
            enc = Encryption.OPEN
            default_pw = u_cls < config.nopass_fraction_of_open
        if default_pw:
            tier = PasswordTier.DEFAULT
        elif u_tier < d1:
            tier = PasswordTier.IN_DICT1
        elif u_tier < d12:
            tier = PasswordTier.IN_DICT2
        else:
            tier = PasswordTier.UNCRACKABLE
        profiles.append(NodeProfile(i, rec.lat, rec.lon, enc, tier))
    return profiles


@dataclass(frozen=True)
class Cluster:
    """Gaussian hot spot for :func:`synth_city` (downtown-like density)."""

    lat: float
    lon: float
    sigma_m: float
    weight: float


def synth_city(node_count: int, bbox: tuple[float, float, float, float],
               clusters: Sequence[Cluster] = (), encrypted_fraction: float = 0.3,
               rng: np.random.Generator | None = None, probe_fraction: float = 0.0,
               bssid_prefix: str = "") -> list[RouterRecord]:
    """Generate a synthetic corpus inside ``bbox = (lat_min, lon_min, lat_max, lon_max)``.

    Each router lands in cluster ``c`` with probability proportional to
    ``c.weight`` and in the uniform background with the remaining
    probability (background weight is ``1 - sum(weights)``, floored at 0).
    Cluster points falling outside the box are redrawn from the background.
    """
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    lat_min, lon_min, lat_max, lon_max = bbox
    if not (lat_max > lat_min and lon_max > lon_min):
        raise ValueError("bounding box is degenerate")
    if not 0.0 <= encrypted_fraction <= 1.0:
        raise ValueError("encrypted_fraction must lie in [0, 1]")
    if rng is None:
        rng = np.random.default_rng()

    weights = np.array([max(0.0, c.weight) for c in clusters] + [0.0])
    weights[-1] = max(0.0, 1.0 - weights[:-1].sum())
    if weights.sum() <= 0:
        weights[-1] = 1.0
    weights /= weights.sum()
    which = rng.choice(len(weights), size=node_count, p=weights)

    lat = rng.uniform(lat_min, lat_max, node_count)
    lon = rng.uniform(lon_min, lon_max, node_count)
    for ci, c in enumerate(clusters):
        mask = which == ci
        k = int(mask.sum())
        if not k:
            continue
        dy, dx = rng.normal(0.0, c.sigma_m, (2, k))
        clat = c.lat + np.degrees(dy / EARTH_RADIUS_M)
        clon = c.lon + np.degrees(dx / (EARTH_RADIUS_M * math.cos(math.radians(c.lat))))
        inside = (clat >= lat_min) & (clat <= lat_max) & (clon >= lon_min) & (clon <= lon_max)
        idx = np.flatnonzero(mask)
        lat[idx[inside]] = clat[inside]
        lon[idx[inside]] = clon[inside]

    enc_draw = rng.random(node_count) < encrypted_fraction
    probe_draw = rng.random(node_count) < probe_fraction
    records = []
    for i in range(node_count):
        records.append(RouterRecord(
            bssid=f"{bssid_prefix}{i:012X}",
            lat=round(float(lat[i]), 7),
            lon=round(float(lon[i]), 7),
            kind=RecordKind.PROBE if probe_draw[i] else RecordKind.INFRASTRUCTURE,
            encryption=Encryption.WEP if enc_draw[i] else Encryption.OPEN,
        ))
    return records


def city_bbox(center_lat: float, center_lon: float, width_m: float,
              height_m: float | None = None) -> tuple[float, float, float, float]:
    """Box of the given size in meters centred on a point."""
    height_m = width_m if height_m is None else height_m
    dlat = math.degrees(0.5 * height_m / EARTH_RADIUS_M)
    dlon = math.degrees(0.5 * width_m / (EARTH_RADIUS_M * math.cos(math.radians(center_lat))))
    return (center_lat - dlat, center_lon - dlon, center_lat + dlat, center_lon + dlon)
