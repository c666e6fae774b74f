"""The dynamic business graph: growth, hub formation, and transaction flows.

Vertices are businesses with an attractiveness score eta in (0, 1]. The
graph grows one vertex per step; each new vertex attaches m distinct edges
to existing vertices with probability proportional to eta * degree, so
well-connected and attractive businesses become hubs, and a late vertex
with higher eta can displace them. Transactions add typed directed flow
edges on top: a service flow from provider to client paired with a capital
flow back.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rng import Stream

SERVICE_FLOW = "service_flow"
CAPITAL_FLOW = "capital_flow"


class TopologyError(ValueError):
    pass


@dataclass
class BusinessVertex:
    id: str
    eta: float
    degree: int = 0
    birth_step: int = 0


@dataclass(frozen=True)
class FlowEdge:
    src: str
    dst: str
    kind: str
    value: float
    step: int


@dataclass(frozen=True)
class EtaDist:
    """Attractiveness distribution: uniform on (0, cap] or a fixed value."""

    kind: str  # "uniform" | "fixed"
    value: float = 1.0  # cap for uniform, the value itself for fixed

    def validate(self) -> list[str]:
        bad = []
        if self.kind not in ("uniform", "fixed"):
            bad.append(f"unknown eta distribution kind: {self.kind!r}")
        if not (0.0 < self.value <= 1.0):
            bad.append("eta distribution value out of (0, 1]")
        return bad

    def draw(self, rng: Stream) -> float:
        """Uniform consumes one draw and maps [0,1) onto (0, cap]; fixed consumes none."""
        if self.kind == "uniform":
            return self.value * (1.0 - rng.random())
        return self.value


class BusinessGraph:
    """Undirected attachment graph plus directed typed flow edges.

    The sampling pool holds one entry per unit of degree, with a single
    floor entry for degree-0 vertices, so a uniform proposal over the pool
    is proportional to max(degree, 1); an eta-acceptance step then yields
    target probability proportional to eta * max(degree, 1).
    """

    def __init__(self):
        self.vertices: dict[str, BusinessVertex] = {}
        self.attachment_edges: list[tuple] = []
        self._edge_set: set[tuple] = set()
        self.flow_edges: list[FlowEdge] = []
        self.next_index = 0
        self._pool: list[str] = []
        self._floor_active: dict[str, bool] = {}

    def add_vertex(self, vertex_id: str, eta: float, birth_step: int) -> BusinessVertex:
        if vertex_id in self.vertices:
            raise TopologyError(f"duplicate vertex id: {vertex_id!r}")
        if not (0.0 < eta <= 1.0):
            raise TopologyError(f"eta out of (0, 1] for {vertex_id!r}")
        v = BusinessVertex(vertex_id, eta, 0, birth_step)
        self.vertices[vertex_id] = v
        self._pool.append(vertex_id)
        self._floor_active[vertex_id] = True
        return v

    def add_attachment_edge(self, a: str, b: str) -> None:
        if a == b:
            raise TopologyError("attachment self-loop")
        if a not in self.vertices or b not in self.vertices:
            raise TopologyError(f"attachment edge references unknown vertex: {(a, b)}")
        key = (a, b) if a < b else (b, a)
        if key in self._edge_set:
            raise TopologyError(f"duplicate attachment edge: {key}")
        self._edge_set.add(key)
        self.attachment_edges.append(key)
        for vid in (a, b):
            self.vertices[vid].degree += 1
            if self._floor_active[vid]:
                self._floor_active[vid] = False  # floor entry becomes the first degree unit
            else:
                self._pool.append(vid)

    def fresh_id(self) -> str:
        vid = f"v{self.next_index}"
        self.next_index += 1
        return vid

    def degree_rank(self, vertex_id: str) -> int:
        """Competition rank by degree: 1 + number of strictly larger degrees."""
        d = self.vertices[vertex_id].degree
        return 1 + sum(1 for v in self.vertices.values() if v.degree > d)

    def to_dot(self) -> str:
        lines = ["graph business {"]
        for vid in sorted(self.vertices):
            v = self.vertices[vid]
            lines.append(f'  "{vid}" [label="{vid} eta={v.eta:.4f} k={v.degree}"];')
        for a, b in sorted(self._edge_set):
            lines.append(f'  "{a}" -- "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def degree_csv(self) -> str:
        lines = ["vertex,eta,degree,birth_step"]
        for vid in sorted(self.vertices):
            v = self.vertices[vid]
            lines.append(f"{vid},{v.eta!r},{v.degree},{v.birth_step}")
        return "\n".join(lines) + "\n"

    def flows_csv(self) -> str:
        lines = ["from,to,kind,value,step"]
        for e in self.flow_edges:
            lines.append(f"{e.src},{e.dst},{e.kind},{e.value!r},{e.step}")
        return "\n".join(lines) + "\n"


def seed_business_graph(count: int, eta_dist: EtaDist, rng: Stream) -> BusinessGraph:
    """Fully connected seed graph; etas drawn in id order."""
    if count < 1:
        raise TopologyError("need at least one seed vertex")
    g = BusinessGraph()
    ids = [g.fresh_id() for _ in range(count)]
    for vid in ids:
        g.add_vertex(vid, eta_dist.draw(rng), 0)
    for i in range(count):
        for j in range(i + 1, count):
            g.add_attachment_edge(ids[i], ids[j])
    return g


def _draw_target(g: BusinessGraph, rng: Stream, exclude: set) -> str:
    """One attachment target, probability proportional to eta * max(degree, 1).

    Repeats (proposal draw; if excluded, redraw; else acceptance draw)
    until a proposal outside `exclude` passes its eta acceptance test.
    """
    while True:
        vid = g._pool[rng.below(len(g._pool))]
        if vid in exclude:
            continue
        if rng.random() < g.vertices[vid].eta:
            return vid


def _add_grown_vertex(g: BusinessGraph, eta: float, step: int, m: int, rng: Stream) -> str:
    if m > len(g.vertices):
        raise TopologyError("m exceeds current vertex count")
    targets: list[str] = []
    excluded: set[str] = set()
    for _ in range(m):
        t = _draw_target(g, rng, excluded)
        targets.append(t)
        excluded.add(t)
    vid = g.fresh_id()
    g.add_vertex(vid, eta, step)
    for t in targets:
        g.add_attachment_edge(vid, t)
    return vid


def grow(g: BusinessGraph, steps: int, m: int, eta_dist: EtaDist, rng: Stream) -> None:
    """Add `steps` vertices with m preferential edges each.

    Per step: one eta draw (uniform only), then per target a proposal /
    acceptance draw sequence.
    """
    if m < 1:
        raise TopologyError("m must be >= 1")
    base = max((v.birth_step for v in g.vertices.values()), default=0)
    for step in range(base + 1, base + steps + 1):
        _add_grown_vertex(g, eta_dist.draw(rng), step, m, rng)


def inject_and_track(g: BusinessGraph, eta_star: float, at_step: int, total_steps: int,
                     m: int, eta_dist: EtaDist, rng: Stream) -> list:
    """Grow for total_steps, inserting one extra vertex with eta_star at at_step.

    The injected vertex is added just before the regular vertex of that
    step and consumes no eta draw. Returns the injected vertex's
    (step, degree rank) at every checkpoint (every total_steps // 20
    steps) from the injection onward, always including the final step.
    """
    if not (1 <= at_step < total_steps):
        raise TopologyError("at_step must satisfy 1 <= at_step < total_steps")
    if m < 1:
        raise TopologyError("m must be >= 1")
    every = max(1, total_steps // 20)
    injected_id = None
    trajectory = []
    for step in range(1, total_steps + 1):
        if step == at_step:
            injected_id = _add_grown_vertex(g, eta_star, step, m, rng)
        _add_grown_vertex(g, eta_dist.draw(rng), step, m, rng)
        if injected_id is not None and (step % every == 0 or step == total_steps):
            trajectory.append((step, g.degree_rank(injected_id)))
    return trajectory


def record_transaction(g: BusinessGraph, provider: str, client: str, value: float, step: int) -> None:
    """Append the paired flow edges of one transaction.

    A service flow runs provider -> client and a capital flow client ->
    provider, both carrying the same value and step.
    """
    if provider not in g.vertices:
        raise TopologyError(f"unknown vertex: {provider!r}")
    if client not in g.vertices:
        raise TopologyError(f"unknown vertex: {client!r}")
    if provider == client:
        raise TopologyError("transaction endpoints must differ")
    if value < 0:
        raise TopologyError("transaction value must be >= 0")
    g.flow_edges.append(FlowEdge(provider, client, SERVICE_FLOW, value, step))
    g.flow_edges.append(FlowEdge(client, provider, CAPITAL_FLOW, value, step))
