"""Four-layer hardware graph: processing, connecting, memory and storage elements.

The graph is built either from an explicit element/link list or from a 2-D
mesh directive (a grid of CEs, one PE per CE, MEs/SEs attached at declared
grid positions). Construction validates the layer invariants; after that the
graph is immutable except for the per-element ``available`` and
``compromised`` flags, which the simulator owns.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from enum import Enum


class ArchError(ValueError):
    """Invalid architecture description or query."""


class ElementKind(Enum):
    PE = "pe"
    CE = "ce"
    ME = "me"
    SE = "se"


# Layer tags: computation, connection, memory, storage.
LAYER_OF_KIND = {
    ElementKind.PE: "MoCp",
    ElementKind.CE: "MoCn",
    ElementKind.ME: "MoM",
    ElementKind.SE: "MoS",
}


class PESubtype(Enum):
    CPU = "cpu"
    GPU = "gpu"
    PUF = "puf"
    ASIC = "asic"
    HWA_FFT = "hwa_fft"
    HWA_MM = "hwa_mm"
    HWA_CRYPTO = "hwa_crypto"


class LogicType(Enum):
    BINARY = "binary"
    TERNARY = "ternary"
    QUATERNARY = "quaternary"
    BINARY_CODED_TERNARY = "bct"


DEFAULT_ME_CAPACITY = 64 * 1024  # bytes
DEFAULT_BANDWIDTH = 32  # bytes per cycle
DEFAULT_LATENCY = 1  # cycles per hop


def _normalize(token: str) -> str:
    return token.strip().lower().replace("-", "").replace("_", "")


_SUBTYPE_ALIASES = {_normalize(m.value): m for m in PESubtype}
_SUBTYPE_ALIASES["hwa"] = PESubtype.HWA_CRYPTO  # bare "hwa" means the crypto accelerator
_LOGIC_ALIASES = {_normalize(m.value): m for m in LogicType}
_LOGIC_ALIASES["binarycodedternary"] = LogicType.BINARY_CODED_TERNARY
_KIND_ALIASES = {m.value: m for m in ElementKind}


def parse_logic(token: str) -> LogicType:
    key = _normalize(token)
    if key not in _LOGIC_ALIASES:
        raise ArchError(f"unknown logic type {token!r}")
    return _LOGIC_ALIASES[key]


def parse_subtype(token: str) -> PESubtype:
    key = _normalize(token)
    if key not in _SUBTYPE_ALIASES:
        raise ArchError(f"unknown PE subtype {token!r}")
    return _SUBTYPE_ALIASES[key]


@dataclass
class Element:
    id: int
    kind: ElementKind
    subtype: PESubtype | None = None
    logic: LogicType = LogicType.BINARY
    reconfigurable: bool = False
    available: float = 1.0
    compromised: bool = False
    capacity: int | None = None  # MEs only, bytes

    @property
    def layer(self) -> str:
        return LAYER_OF_KIND[self.kind]


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    bandwidth: int = DEFAULT_BANDWIDTH
    latency: int = DEFAULT_LATENCY


class ArchGraph:
    """Element/link graph with hop queries over the connection fabric."""

    def __init__(self, elements, links, mesh_shape=None):
        self.elements: dict[int, Element] = {}
        for el in elements:
            if el.id in self.elements:
                raise ArchError(f"duplicate element id {el.id}")
            self.elements[el.id] = el
        self.links: list[Link] = list(links)
        self.mesh_shape = mesh_shape
        self._adj: dict[int, list[int]] = {eid: [] for eid in self.elements}
        self._link_by_pair: dict[tuple[int, int], Link] = {}
        for ln in self.links:
            for end in (ln.a, ln.b):
                if end not in self.elements:
                    raise ArchError(f"link ({ln.a}, {ln.b}) references unknown element id {end}")
            if ln.a == ln.b:
                raise ArchError(f"self-loop link on element id {ln.a}")
            if ln.bandwidth <= 0:
                raise ArchError(f"link ({ln.a}, {ln.b}) has non-positive bandwidth {ln.bandwidth}")
            if ln.latency < 0:
                raise ArchError(f"link ({ln.a}, {ln.b}) has negative latency {ln.latency}")
            self._adj[ln.a].append(ln.b)
            self._adj[ln.b].append(ln.a)
            key = (min(ln.a, ln.b), max(ln.a, ln.b))
            self._link_by_pair[key] = ln
        for eid in self._adj:
            self._adj[eid] = sorted(set(self._adj[eid]))
        self._base_logic = {eid: el.logic for eid, el in self.elements.items()}
        self.validate()

    def reset_runtime_state(self) -> None:
        """Restore availability, compromise flags and as-built logic types."""
        for eid, el in self.elements.items():
            el.available = 1.0
            el.compromised = False
            el.logic = self._base_logic[eid]

    # -- queries ---------------------------------------------------------

    def element(self, eid: int) -> Element:
        try:
            return self.elements[eid]
        except KeyError:
            raise ArchError(f"unknown element id {eid}") from None

    def neighbors(self, eid: int) -> list[int]:
        self.element(eid)
        return self._adj[eid]

    def link_between(self, a: int, b: int) -> Link:
        return self._link_by_pair[(min(a, b), max(a, b))]

    def kind_ids(self, kind: ElementKind) -> list[int]:
        return sorted(eid for eid, el in self.elements.items() if el.kind == kind)

    def pes(self) -> list[Element]:
        return [self.elements[eid] for eid in self.kind_ids(ElementKind.PE)]

    def distances_from(self, src: int) -> dict[int, int]:
        """BFS hop distances from src over the link graph."""
        self.element(src)
        dist = {src: 0}
        frontier = deque([src])
        while frontier:
            cur = frontier.popleft()
            for nxt in self._adj[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    frontier.append(nxt)
        return dist

    def hop_distance(self, a: int, b: int) -> int | None:
        """Shortest hop count between a and b, or None if unreachable."""
        self.element(a)
        self.element(b)
        if a == b:
            return 0
        return self.distances_from(a).get(b)

    def shortest_path(self, a: int, b: int) -> list[int] | None:
        """Lowest-id shortest path (list of element ids, endpoints included)."""
        self.element(a)
        self.element(b)
        if a == b:
            return [a]
        parent: dict[int, int] = {a: a}
        frontier = deque([a])
        while frontier:
            cur = frontier.popleft()
            for nxt in self._adj[cur]:
                if nxt not in parent:
                    parent[nxt] = cur
                    if nxt == b:
                        path = [b]
                        while path[-1] != a:
                            path.append(parent[path[-1]])
                        return path[::-1]
                    frontier.append(nxt)
        return None

    def path_metrics(self, path: list[int]) -> tuple[int, int, int]:
        """(hops, min bandwidth, total latency) along an element-id path."""
        hops = len(path) - 1
        if hops == 0:
            return 0, 0, 0
        bw = min(self.link_between(u, v).bandwidth for u, v in zip(path, path[1:]))
        lat = sum(self.link_between(u, v).latency for u, v in zip(path, path[1:]))
        return hops, bw, lat

    def nearest_available(
        self,
        from_id: int,
        kind: ElementKind | None = ElementKind.PE,
        subtype: PESubtype | None = None,
        logic: LogicType | None = None,
    ) -> int | None:
        """Closest element with available > 0 matching the filters.

        Ties at equal hop distance resolve to the smallest element id, so the
        search is deterministic. Returns None when no candidate exists.
        """
        dist = self.distances_from(from_id)
        best: tuple[int, int] | None = None
        for eid in sorted(self.elements):
            el = self.elements[eid]
            if kind is not None and el.kind != kind:
                continue
            if subtype is not None and el.subtype != subtype:
                continue
            if logic is not None and el.logic != logic:
                continue
            if el.available <= 0.0 or eid not in dist:
                continue
            cand = (dist[eid], eid)
            if best is None or cand < best:
                best = cand
        return None if best is None else best[1]

    # -- invariants ------------------------------------------------------

    def validate(self) -> None:
        """Sweep all layer/link invariants; raises ArchError naming the offender."""
        if not self.elements:
            raise ArchError("no elements")
        for el in self.elements.values():
            if not 0.0 <= el.available <= 1.0:
                raise ArchError(f"element {el.id}: available {el.available} outside [0, 1]")
            if el.kind == ElementKind.PE and el.subtype is None:
                raise ArchError(f"element {el.id}: PE without subtype")
            if el.kind != ElementKind.PE and el.subtype is not None:
                raise ArchError(f"element {el.id}: subtype on non-PE element")
        ce_ids = set(self.kind_ids(ElementKind.CE))
        for el in self.elements.values():
            if el.kind == ElementKind.CE:
                continue
            if not any(n in ce_ids for n in self._adj[el.id]):
                raise ArchError(f"element {el.id} ({el.kind.value}) has no link to a CE")
        n_pes = len(self.kind_ids(ElementKind.PE))
        if n_pes >= 2 and ce_ids:
            seen = {min(ce_ids)}
            frontier = deque(seen)
            while frontier:
                cur = frontier.popleft()
                for nxt in self._adj[cur]:
                    if nxt in ce_ids and nxt not in seen:
                        seen.add(nxt)
                        frontier.append(nxt)
            missing = ce_ids - seen
            if missing:
                raise ArchError(f"connection layer is disconnected: CE {min(missing)} unreachable")


# -- construction ----------------------------------------------------------


def build_arch(config: dict) -> ArchGraph:
    """Build an ArchGraph from a parsed architecture description.

    The description carries either explicit "elements"/"links" lists or a
    "mesh" directive (the two are mutually exclusive). See the repository
    README for the schema.
    """
    if not isinstance(config, dict):
        raise ArchError("architecture description must be a JSON object")
    if "mesh" in config and ("elements" in config or "links" in config):
        raise ArchError("'mesh' is mutually exclusive with explicit 'elements'/'links'")
    if "mesh" in config:
        return _build_mesh(config["mesh"])
    elements = [_parse_element(i, raw) for i, raw in enumerate(config.get("elements", []))]
    if not elements:
        raise ArchError("no elements")
    links = [_parse_link(i, raw) for i, raw in enumerate(config.get("links", []))]
    return ArchGraph(elements, links)


def load_arch(path: str) -> ArchGraph:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArchError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return build_arch(config)


def _req(raw: dict, field: str, where: str):
    if field not in raw:
        raise ArchError(f"{where}: missing '{field}'")
    return raw[field]


def _parse_element(idx: int, raw: dict) -> Element:
    where = f"elements[{idx}]"
    if not isinstance(raw, dict):
        raise ArchError(f"{where}: expected an object")
    eid = _req(raw, "id", where)
    if not isinstance(eid, int):
        raise ArchError(f"{where}.id: expected integer, got {eid!r}")
    kind_tok = str(_req(raw, "kind", where)).lower()
    if kind_tok not in _KIND_ALIASES:
        raise ArchError(f"{where}.kind: unknown kind {kind_tok!r}")
    kind = _KIND_ALIASES[kind_tok]
    subtype = None
    if kind == ElementKind.PE:
        subtype = parse_subtype(str(raw.get("subtype", "cpu")))
    elif "subtype" in raw:
        raise ArchError(f"{where}.subtype: only valid on PE elements")
    logic = parse_logic(str(raw.get("logic", "binary")))
    capacity = raw.get("capacity")
    if kind == ElementKind.ME and capacity is None:
        capacity = DEFAULT_ME_CAPACITY
    return Element(
        id=eid,
        kind=kind,
        subtype=subtype,
        logic=logic,
        reconfigurable=bool(raw.get("reconfigurable", False)),
        capacity=capacity,
    )


def _parse_link(idx: int, raw: dict) -> Link:
    where = f"links[{idx}]"
    if not isinstance(raw, dict):
        raise ArchError(f"{where}: expected an object")
    a = _req(raw, "a", where)
    b = _req(raw, "b", where)
    bw = raw.get("bandwidth", DEFAULT_BANDWIDTH)
    lat = raw.get("latency", DEFAULT_LATENCY)
    for name, val in (("a", a), ("b", b), ("bandwidth", bw), ("latency", lat)):
        if not isinstance(val, int):
            raise ArchError(f"{where}.{name}: expected integer, got {val!r}")
    return Link(a=a, b=b, bandwidth=bw, latency=lat)


def _build_mesh(spec: dict) -> ArchGraph:
    """Grid of CEs with one PE per CE; MEs/SEs attach at declared positions."""
    where = "mesh"
    rows = _req(spec, "rows", where)
    cols = _req(spec, "cols", where)
    if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 1 and cols >= 1):
        raise ArchError(f"{where}: rows/cols must be integers >= 1")
    bandwidth = spec.get("bandwidth", DEFAULT_BANDWIDTH)
    latency = spec.get("latency", DEFAULT_LATENCY)
    n_ce = rows * cols

    pe_specs = spec.get("pes", [{}])
    if isinstance(pe_specs, dict):
        pe_specs = [pe_specs]
    if not isinstance(pe_specs, list) or not pe_specs:
        raise ArchError(f"{where}.pes: expected an object or non-empty list")

    elements: list[Element] = []
    links: list[Link] = []
    for ce in range(n_ce):
        elements.append(Element(id=ce, kind=ElementKind.CE))
    for r in range(rows):
        for c in range(cols):
            ce = r * cols + c
            if c + 1 < cols:
                links.append(Link(ce, ce + 1, bandwidth, latency))
            if r + 1 < rows:
                links.append(Link(ce, ce + cols, bandwidth, latency))

    for i in range(n_ce):
        raw = pe_specs[i % len(pe_specs)]
        pe_id = n_ce + i
        elements.append(
            Element(
                id=pe_id,
                kind=ElementKind.PE,
                subtype=parse_subtype(str(raw.get("subtype", "cpu"))),
                logic=parse_logic(str(raw.get("logic", "binary"))),
                reconfigurable=bool(raw.get("reconfigurable", False)),
            )
        )
        links.append(Link(pe_id, i, bandwidth, latency))

    next_id = 2 * n_ce
    for key, kind in (("mes", ElementKind.ME), ("ses", ElementKind.SE)):
        for j, raw in enumerate(spec.get(key, [])):
            spot = f"{where}.{key}[{j}]"
            r = _req(raw, "row", spot)
            c = _req(raw, "col", spot)
            if not (0 <= r < rows and 0 <= c < cols):
                raise ArchError(f"{spot}: position ({r}, {c}) outside the {rows}x{cols} grid")
            capacity = raw.get("capacity", DEFAULT_ME_CAPACITY) if kind == ElementKind.ME else None
            elements.append(Element(id=next_id, kind=kind, capacity=capacity))
            links.append(Link(next_id, r * cols + c, bandwidth, latency))
            next_id += 1

    return ArchGraph(elements, links, mesh_shape=(rows, cols))
