"""Input parsing, geodesic distance and result serialization.

Paths are newline-delimited JSON, one object per line::

    {"path_id": "w1", "nodes": [{"id": "n1", "lon": 2.17, "lat": 41.38}, ...]}

Venues are a four-column CSV with header ``venue_id,category,lat,lon``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence, Union

EARTH_RADIUS_KM = 6371.0088

CATEGORIES: tuple[str, ...] = (
    "Medical Center",
    "Travel & Transport",
    "Food",
    "College & University",
    "Residence",
    "Arts & Entertainment",
    "Shops & Service",
    "Nightlife Spot",
    "Professional & Other Places",
    "Outdoors & Recreation",
)

CURVE_HEADER = "p,gcc_size,slcc_size"
VENUES_HEADER = ("venue_id", "category", "lat", "lon")


class InputError(ValueError):
    """Raised for any malformed or invalid input record."""


class ParseError(InputError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ValidationError(InputError):
    pass


@dataclass(frozen=True)
class GeoPoint:
    lon: float
    lat: float

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise ValidationError(f"non-finite coordinate ({self.lon}, {self.lat})")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude {self.lon} out of range [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude {self.lat} out of range [-90, 90]")


@dataclass(frozen=True)
class PathRecord:
    path_id: str
    nodes: tuple[tuple[str, GeoPoint], ...]

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise ValidationError(f"path {self.path_id!r}: path needs >=2 nodes")
        for (a, _), (b, _) in zip(self.nodes, self.nodes[1:]):
            if a == b:
                raise ValidationError(
                    f"path {self.path_id!r}: consecutive duplicate node {a!r}"
                )

    @property
    def node_ids(self) -> list[str]:
        return [nid for nid, _ in self.nodes]


@dataclass(frozen=True)
class VenueRecord:
    venue_id: str
    category: str
    point: GeoPoint

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValidationError(f"unknown category {self.category!r}")


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometers on a sphere of mean Earth radius."""
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon) - math.radians(a.lon)
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def _lines(stream: Union[IO[bytes], IO[str], Iterable]) -> Iterable[str]:
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield raw


def _number(value, lineno: int, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(lineno, f"{what} must be a number, got {value!r}")
    return float(value)


def parse_paths_file(stream) -> list[PathRecord]:
    """Parse a JSON-lines paths file (bytes or text stream).

    Blank lines are skipped. Malformed JSON or missing fields raise
    :class:`ParseError`; structural violations raise :class:`ValidationError`.
    """
    records = []
    for lineno, line in enumerate(_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict) or "path_id" not in obj or "nodes" not in obj:
            raise ParseError(lineno, "expected object with 'path_id' and 'nodes'")
        if not isinstance(obj["nodes"], list):
            raise ParseError(lineno, "'nodes' must be a list")
        nodes = []
        for item in obj["nodes"]:
            if not isinstance(item, dict) or not {"id", "lon", "lat"} <= item.keys():
                raise ParseError(lineno, "each node needs 'id', 'lon' and 'lat'")
            lon = _number(item["lon"], lineno, "lon")
            lat = _number(item["lat"], lineno, "lat")
            try:
                nodes.append((str(item["id"]), GeoPoint(lon, lat)))
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
        try:
            records.append(PathRecord(str(obj["path_id"]), tuple(nodes)))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return records


def parse_venues_file(stream) -> list[VenueRecord]:
    """Parse the venues CSV. Categories are a closed set; ids must be unique."""
    reader = csv.reader(_lines(stream))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != VENUES_HEADER:
        raise ParseError(1, f"expected header {','.join(VENUES_HEADER)!r}")
    venues = []
    seen: set[str] = set()
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(lineno, f"expected 4 columns, got {len(row)}")
        vid, category, lat_s, lon_s = (c.strip() for c in row)
        try:
            lat, lon = float(lat_s), float(lon_s)
        except ValueError:
            raise ParseError(lineno, f"malformed coordinates {lat_s!r}, {lon_s!r}") from None
        if vid in seen:
            raise ValidationError(f"line {lineno}: duplicate venue_id {vid!r}")
        seen.add(vid)
        try:
            venues.append(VenueRecord(vid, category, GeoPoint(lon, lat)))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return venues


def read_paths(path) -> list[PathRecord]:
    with open(path, "rb") as fh:
        return parse_paths_file(fh)


def read_venues(path) -> list[VenueRecord]:
    with open(path, "rb") as fh:
        return parse_venues_file(fh)


# -- result artifacts --------------------------------------------------------

def _fmt_size(value) -> str:
    # integer sizes for single runs; ensemble means keep 6 decimals
    if isinstance(value, float) and not value.is_integer():
        return f"{value:.6f}"
    return str(int(value))


def write_curve_csv(curve: Sequence) -> str:
    """Serialize checkpoints ``(p, gcc_size, slcc_size)`` as CSV text."""
    out = [CURVE_HEADER]
    for p, gcc, slcc in curve:
        out.append(f"{p:.6f},{_fmt_size(gcc)},{_fmt_size(slcc)}")
    return "\n".join(out) + "\n"


def parse_curve_csv(text: str) -> list[tuple]:
    lines = text.splitlines()
    if not lines or lines[0] != CURVE_HEADER:
        raise ParseError(1, f"expected header {CURVE_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(lineno, "expected 3 columns")
        sizes = [float(s) if "." in s else int(s) for s in parts[1:]]
        rows.append((float(parts[0]), *sizes))
    return rows


def write_runs_csv(p_values: Sequence[float]) -> str:
    out = ["run_index,p_c"]
    out.extend(f"{i},{p:.6f}" for i, p in enumerate(p_values))
    return "\n".join(out) + "\n"


def write_summary_json(summary: dict) -> str:
    """Serialize a summary mapping. Key order is preserved, floats use repr."""
    return json.dumps(summary, indent=2, allow_nan=False) + "\n"


def parse_summary_json(text: str) -> dict:
    return json.loads(text)


def write_table_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()
