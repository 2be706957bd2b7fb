"""Resonator network layouts built from axis-aligned rectangles.

All lengths are in meters.  A plate is ``horizontal`` when its long axis runs
along x.  Bridges are rectangles that abut plates edge-to-edge; they never
overlap a plate's interior.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .errors import InvalidArgument, InvalidGeometry

SCHEMES = ("NN", "AA", "AN")
_REL = 1e-9


@dataclass(frozen=True)
class Material:
    youngs_modulus: float = 1050e9
    poisson: float = 0.1
    density: float = 3515.0
    thickness: float = 0.6e-6

    def __post_init__(self):
        if not (self.youngs_modulus > 0 and math.isfinite(self.youngs_modulus)):
            raise InvalidArgument(f"Young's modulus must be positive, got {self.youngs_modulus}")
        if not (0.0 <= self.poisson < 0.5):
            raise InvalidArgument(f"Poisson ratio must lie in [0, 0.5), got {self.poisson}")
        if not (self.density > 0 and math.isfinite(self.density)):
            raise InvalidArgument(f"density must be positive, got {self.density}")
        if not (self.thickness > 0 and math.isfinite(self.thickness)):
            raise InvalidArgument(f"thickness must be positive, got {self.thickness}")

    @property
    def bar_velocity(self) -> float:
        return math.sqrt(self.youngs_modulus / self.density)

    def rod_frequency(self, length: float) -> float:
        """Half-wave extensional frequency of a free-free rod of this length."""
        return self.bar_velocity / (2.0 * length)


DIAMOND = Material()


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def dx(self) -> float:
        return self.x1 - self.x0

    @property
    def dy(self) -> float:
        return self.y1 - self.y0

    def translated(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def interiors_overlap(self, other: "Rect", tol: float) -> bool:
        return (min(self.x1, other.x1) - max(self.x0, other.x0) > tol
                and min(self.y1, other.y1) - max(self.y0, other.y0) > tol)

    def shared_edge(self, other: "Rect", tol: float) -> float:
        """Length of the boundary segment shared with ``other`` (0 if only corners touch)."""
        ox = min(self.x1, other.x1) - max(self.x0, other.x0)
        oy = min(self.y1, other.y1) - max(self.y0, other.y0)
        if abs(ox) <= tol and oy > tol:
            return oy
        if abs(oy) <= tol and ox > tol:
            return ox
        return 0.0


@dataclass(frozen=True)
class PlateSpec:
    length: float
    width: float
    origin: tuple[float, float] = (0.0, 0.0)
    orientation: str = "horizontal"
    tag: int = 0

    def __post_init__(self):
        if self.orientation not in ("horizontal", "vertical"):
            raise InvalidArgument(f"orientation must be 'horizontal' or 'vertical', got {self.orientation!r}")
        vals = (self.length, self.width, *self.origin)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgument("plate dimensions and origin must be finite")
        if not (self.length > self.width > 0):
            raise InvalidArgument(
                f"plate needs length > width > 0, got length={self.length}, width={self.width}")

    @property
    def horizontal(self) -> bool:
        return self.orientation == "horizontal"

    @property
    def rect(self) -> Rect:
        x0, y0 = self.origin
        if self.horizontal:
            return Rect(x0, y0, x0 + self.length, y0 + self.width)
        return Rect(x0, y0, x0 + self.width, y0 + self.length)

    @property
    def axis(self) -> int:
        """0 when the long axis is x, 1 when it is y."""
        return 0 if self.horizontal else 1

    @property
    def center(self) -> tuple[float, float]:
        r = self.rect
        return (0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1))

    def at(self, x0: float, y0: float, **kw) -> "PlateSpec":
        return replace(self, origin=(x0, y0), **kw)


@dataclass(frozen=True)
class BridgeSpec:
    scheme: str
    length: float
    width: float
    offset_fraction: float | None = None

    def __post_init__(self):
        s = self.scheme.upper()
        if s not in SCHEMES:
            raise InvalidArgument(f"unknown coupling scheme {self.scheme!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "scheme", s)
        if not (self.length > 0 and self.width > 0):
            raise InvalidArgument(f"bridge length and width must be positive, got {self.length}, {self.width}")
        if s == "NN":
            f = self.offset_fraction
            if f is None or not (0 < f <= 1):
                raise InvalidArgument(f"NN bridges need 0 < offset_fraction <= 1, got {f}")


@dataclass(frozen=True)
class Bridge:
    """A placed bridge rectangle.  ``plates[1]`` is None for a half-bridge ending on the cell boundary."""

    spec: BridgeSpec
    plates: tuple[int, int | None]
    rect: Rect


@dataclass(frozen=True)
class NetworkLayout:
    plates: tuple[PlateSpec, ...]
    bridges: tuple[Bridge, ...] = ()
    material: Material = DIAMOND
    cell: Rect | None = None
    kind: str = "network"

    def __post_init__(self):
        object.__setattr__(self, "plates", tuple(self.plates))
        object.__setattr__(self, "bridges", tuple(self.bridges))
        _validate(self)

    @property
    def rects(self) -> list[Rect]:
        return [p.rect for p in self.plates] + [b.rect for b in self.bridges]

    @property
    def region_names(self) -> list[str]:
        names = [f"plate{i}" for i in range(len(self.plates))]
        names += [f"bridge{j}" for j in range(len(self.bridges))]
        return names

    @property
    def bounding_box(self) -> Rect:
        if self.cell is not None:
            return self.cell
        rs = self.rects
        return Rect(min(r.x0 for r in rs), min(r.y0 for r in rs),
                    max(r.x1 for r in rs), max(r.y1 for r in rs))

    @property
    def area(self) -> float:
        return math.fsum(r.area for r in self.rects)

    @property
    def scale(self) -> float:
        bb = self.bounding_box
        return max(bb.dx, bb.dy)

    def min_feature(self) -> tuple[float, str]:
        best = (math.inf, "")
        for name, r in zip(self.region_names, self.rects):
            m = min(r.dx, r.dy)
            if m < best[0]:
                best = (m, name)
        return best

    def translated(self, dx: float, dy: float) -> "NetworkLayout":
        plates = [p.at(p.origin[0] + dx, p.origin[1] + dy) for p in self.plates]
        bridges = [replace(b, rect=b.rect.translated(dx, dy)) for b in self.bridges]
        cell = self.cell.translated(dx, dy) if self.cell is not None else None
        return NetworkLayout(tuple(plates), tuple(bridges), self.material, cell, self.kind)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "material": asdict(self.material),
            "plates": [asdict(p) for p in self.plates],
            "bridges": [{"spec": asdict(b.spec), "plates": list(b.plates), "rect": asdict(b.rect)}
                        for b in self.bridges],
            "cell": asdict(self.cell) if self.cell is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkLayout":
        plates = tuple((_SquarePlate if p["length"] == p["width"] else PlateSpec)(
            p["length"], p["width"], tuple(p["origin"]), p["orientation"], p["tag"]) for p in d["plates"])
        bridges = tuple(Bridge(BridgeSpec(**b["spec"]), tuple(b["plates"]), Rect(**b["rect"]))
                        for b in d["bridges"])
        cell = Rect(**d["cell"]) if d.get("cell") else None
        return cls(plates, bridges, Material(**d["material"]), cell, d.get("kind", "network"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NetworkLayout":
        return cls.from_dict(json.loads(text))


def _validate(layout: NetworkLayout) -> None:
    if not layout.plates:
        raise InvalidGeometry("layout needs at least one plate")
    tol = _REL * max(max(r.dx, r.dy) for r in layout.rects)
    prs = [p.rect for p in layout.plates]
    for i in range(len(prs)):
        for j in range(i + 1, len(prs)):
            if prs[i].interiors_overlap(prs[j], tol):
                raise InvalidGeometry(f"plates {i} and {j} overlap")
    brs = [b.rect for b in layout.bridges]
    for j, b in enumerate(layout.bridges):
        for i, pr in enumerate(prs):
            if b.rect.interiors_overlap(pr, tol):
                raise InvalidGeometry(f"bridge {j} overlaps plate {i}")
        for k in range(j + 1, len(brs)):
            if b.rect.interiors_overlap(brs[k], tol):
                raise InvalidGeometry(f"bridges {j} and {k} overlap")
        a, c = b.plates
        ends = [a] if c is None else [a, c]
        for i in ends:
            if not (0 <= i < len(prs)):
                raise InvalidGeometry(f"bridge {j} refers to missing plate {i}")
            r = b.rect
            edge = min(r.dx, r.dy)
            if abs(r.shared_edge(prs[i], tol) - edge) > tol:
                raise InvalidGeometry(f"bridge {j} does not attach to plate {i} along a full edge")
        if c is None:
            cell = layout.cell
            if cell is None:
                raise InvalidGeometry(f"bridge {j} has a free end but the layout has no periodic cell")
            r = b.rect
            on_boundary = (abs(r.x0 - cell.x0) <= tol or abs(r.x1 - cell.x1) <= tol
                           or abs(r.y0 - cell.y0) <= tol or abs(r.y1 - cell.y1) <= tol)
            if not on_boundary:
                raise InvalidGeometry(f"half-bridge {j} does not reach the cell boundary")
        for i, pr in enumerate(prs):
            if i not in ends and b.rect.shared_edge(pr, tol) > tol:
                raise InvalidGeometry(f"bridge {j} touches undeclared plate {i}")
    # connectivity of plates through bridges
    parent = list(range(len(prs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for b in layout.bridges:
        a, c = b.plates
        if c is not None:
            parent[find(a)] = find(c)
    roots = {find(i) for i in range(len(prs))}
    if len(roots) > 1:
        raise InvalidGeometry(f"layout is not connected ({len(roots)} components)")


# --- construction -----------------------------------------------------------

def _nn_bridges(spec: BridgeSpec, lower: Rect, upper: Rect, x_mid: float, ref_length: float):
    span = spec.offset_fraction * ref_length
    if not span > 2 * spec.width:
        raise InvalidGeometry(
            f"NN bridges overlap: offset span {span:.4g} m must exceed twice the bridge width "
            f"({2 * spec.width:.4g} m)")
    lo = max(lower.x0, upper.x0)
    hi = min(lower.x1, upper.x1)
    if x_mid - span / 2 < lo - 1e-15 or x_mid + span / 2 > hi + 1e-15:
        raise InvalidGeometry("NN bridge span exceeds the facing plate edges")
    y0, y1 = lower.y1, upper.y0
    left = Rect(x_mid - span / 2, y0, x_mid - span / 2 + spec.width, y1)
    right = Rect(x_mid + span / 2 - spec.width, y0, x_mid + span / 2, y1)
    return left, right


def _check_pair_width(spec: BridgeSpec, *edges: float):
    for e in edges:
        if spec.width >= e:
            raise InvalidGeometry(f"bridge width {spec.width:.4g} m does not fit on an edge of {e:.4g} m")


def _transpose_plate(p: PlateSpec) -> PlateSpec:
    o = "vertical" if p.horizontal else "horizontal"
    return p.at(p.origin[1], p.origin[0], orientation=o)


def _transpose_layout(layout: NetworkLayout) -> NetworkLayout:
    plates = tuple(_transpose_plate(p) for p in layout.plates)
    bridges = tuple(replace(b, rect=Rect(b.rect.y0, b.rect.x0, b.rect.y1, b.rect.x1))
                    for b in layout.bridges)
    return NetworkLayout(plates, bridges, layout.material, None, layout.kind)


def layout_pair(scheme: str, plateA: PlateSpec, plateB: PlateSpec, bridge: BridgeSpec,
                material: Material = DIAMOND) -> NetworkLayout:
    """Two plates joined by one scheme.  Plate A stays at its origin; B is placed relative to it."""
    scheme = scheme.upper()
    if scheme not in SCHEMES:
        raise InvalidArgument(f"unknown coupling scheme {scheme!r}")
    if bridge.scheme != scheme:
        raise InvalidArgument(f"bridge scheme {bridge.scheme} does not match {scheme}")
    if scheme == "AN":
        if plateA.orientation == plateB.orientation:
            raise InvalidArgument("AN coupling needs orthogonal plate orientations")
    elif plateA.orientation != plateB.orientation:
        raise InvalidArgument(f"{scheme} coupling needs equal plate orientations")
    if not plateA.horizontal:
        ox, oy = plateA.origin
        t = layout_pair(scheme, _transpose_plate(plateA), _transpose_plate(plateB), bridge, material)
        out = _transpose_layout(t)
        return NetworkLayout(out.plates, out.bridges, material, None, "pair")
    return layout_chain_from_plates([plateA.at(*plateA.origin, tag=0), plateB.at(0.0, 0.0, tag=1)],
                                    bridge, material, kind="pair")


def layout_chain(n: int, scheme: str, lengths: Sequence[float], widths: Sequence[float],
                 bridge: BridgeSpec, material: Material = DIAMOND) -> NetworkLayout:
    """A 1D chain.  NN stacks along y, AA and AN run along x; AN alternates horizontal/vertical."""
    scheme = scheme.upper()
    if scheme not in SCHEMES:
        raise InvalidArgument(f"unknown coupling scheme {scheme!r}")
    if bridge.scheme != scheme:
        raise InvalidArgument(f"bridge scheme {bridge.scheme} does not match {scheme}")
    if n < 1 or len(lengths) != n or len(widths) != n:
        raise InvalidArgument(f"need n >= 1 and {n} lengths and widths")
    plates = []
    for k in range(n):
        orient = "vertical" if (scheme == "AN" and k % 2 == 1) else "horizontal"
        plates.append(PlateSpec(lengths[k], widths[k], (0.0, 0.0), orient, k))
    return layout_chain_from_plates(plates, bridge, material, kind="chain")


def layout_chain_from_plates(plates: Sequence[PlateSpec], bridge: BridgeSpec,
                             material: Material = DIAMOND, kind: str = "chain") -> NetworkLayout:
    scheme = bridge.scheme
    first = plates[0]
    placed = [first.at(*first.origin, tag=0)]
    bridges = []
    if scheme == "NN":
        x_mid = first.center[0]
        for k in range(1, len(plates)):
            prev = placed[-1].rect
            p = plates[k]
            if not p.horizontal:
                raise InvalidArgument("NN chains use horizontal plates only")
            q = p.at(x_mid - p.length / 2, prev.y1 + bridge.length, tag=k)
            ref = min(placed[-1].length, q.length)
            left, right = _nn_bridges(bridge, prev, q.rect, x_mid, ref)
            placed.append(q)
            bridges += [Bridge(bridge, (k - 1, k), left), Bridge(bridge, (k - 1, k), right)]
    else:
        if not first.horizontal:
            raise InvalidArgument(f"{scheme} chains start with a horizontal plate")
        y_c = first.center[1]
        for k in range(1, len(plates)):
            prev = placed[-1]
            p = plates[k]
            if scheme == "AA" and not p.horizontal:
                raise InvalidArgument("AA chains use horizontal plates only")
            if scheme == "AN" and p.horizontal == prev.horizontal:
                raise InvalidArgument("AN chains alternate plate orientations")
            x0 = prev.rect.x1 + bridge.length
            if p.horizontal:
                q = p.at(x0, y_c - p.width / 2, tag=k)
                _check_pair_width(bridge, q.width)
            else:
                q = p.at(x0, y_c - p.length / 2, tag=k)
            _check_pair_width(bridge, prev.width, p.width)
            br = Rect(prev.rect.x1, y_c - bridge.width / 2, x0, y_c + bridge.width / 2)
            placed.append(q)
            bridges.append(Bridge(bridge, (k - 1, k), br))
    return NetworkLayout(tuple(placed), tuple(bridges), material, None, kind)


def layout_single(plate: PlateSpec, material: Material = DIAMOND) -> NetworkLayout:
    return NetworkLayout((plate.at(*plate.origin, tag=0),), (), material, None, "single")


def layout_phononic_cell(square_size: float, bridge: BridgeSpec,
                         material: Material = DIAMOND) -> NetworkLayout:
    """Square plate with four half-bridges reaching the boundary of the periodic cell.

    The lattice constant is ``square_size + bridge.length``; each half-bridge
    is ``bridge.length / 2`` long.
    """
    a = square_size
    w = bridge.width
    if not (a > 0 and math.isfinite(a)):
        raise InvalidArgument(f"square size must be positive, got {a}")
    if w >= a:
        raise InvalidGeometry(f"bridge width {w:.4g} m must be smaller than the square {a:.4g} m")
    half = bridge.length / 2
    period = a + bridge.length
    c = period / 2
    sq = _SquarePlate(a, a, (half, half), "horizontal", 0)
    bs = (
        Bridge(bridge, (0, None), Rect(0.0, c - w / 2, half, c + w / 2)),
        Bridge(bridge, (0, None), Rect(half + a, c - w / 2, period, c + w / 2)),
        Bridge(bridge, (0, None), Rect(c - w / 2, 0.0, c + w / 2, half)),
        Bridge(bridge, (0, None), Rect(c - w / 2, half + a, c + w / 2, period)),
    )
    return NetworkLayout((sq,), bs, material, Rect(0.0, 0.0, period, period), "phononic_cell")


@dataclass(frozen=True)
class _SquarePlate(PlateSpec):
    """Square plate of a phononic cell; exempt from the length > width rule."""

    def __post_init__(self):
        if not (self.length == self.width and self.length > 0):
            raise InvalidArgument("square plate must have equal positive sides")
