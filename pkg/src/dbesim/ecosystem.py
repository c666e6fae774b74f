"""Habitats, weighted inter-habitat connections, migration, and self-healing.

Each habitat holds a local service pool and evolves one population of
supply chains per request template in its profile. Services used in
successful deployments migrate along connections, connections are
reinforced when migrated services prove useful and decay otherwise, and
the connection graph heals itself after habitat failures so it stays
connected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .evolution import (
    EvolutionParams,
    GenerationStat,
    advance,
    best_individual,
    init_population,
    population_stats,
    record_deployment,
)
from .manifest import Catalog, Request
from .rng import Stream

W_MIN_DEFAULT = 0.01


class EcosystemError(ValueError):
    pass


@dataclass(frozen=True)
class EcosystemParams:
    p_mig: float = 0.2
    reinforce_delta: float = 0.1
    decay_lambda: float = 0.99
    w_min: float = W_MIN_DEFAULT

    def validate(self) -> list[str]:
        bad = []
        if not (0.0 <= self.p_mig <= 1.0):
            bad.append("p_mig out of range")
        if self.reinforce_delta <= 0.0:
            bad.append("reinforce_delta must be > 0")
        if not (0.0 < self.decay_lambda <= 1.0):
            bad.append("decay out of range")
        if self.w_min <= 0.0:
            bad.append("w_min must be > 0")
        return bad


@dataclass(frozen=True)
class RequestTemplate:
    """A profile entry: a request template and its sampling weight."""

    request: Request
    weight: float = 1.0


@dataclass(frozen=True)
class MigrationEvent:
    service_id: str
    source: str
    destination: str
    epoch: int


@dataclass
class Deployment:
    """What a habitat deployed this epoch."""

    request_id: str
    genome: tuple
    fitness: float
    success: bool


@dataclass
class ActiveEvolution:
    """Resumable evolution state for one request template.

    The generation budget is counted since the last pool change: fresh
    genetic material (a migrated service) re-opens the search, otherwise a
    template that cannot reach the target stops consuming generations once
    max_generations have been spent on the current pool.
    """

    request_id: str
    population: list
    gens_since_reset: int = 0
    total_generations: int = 0
    pool_version: int = 0
    trace: list = field(default_factory=list)


@dataclass
class Habitat:
    """A per-SME node: local pool, request profile, evolution state."""

    id: str
    pool: Catalog
    profile: list  # of RequestTemplate
    provenance: dict = field(default_factory=dict)  # service id -> source habitat id
    active: dict = field(default_factory=dict)  # request id -> ActiveEvolution
    pool_version: int = 0
    last_deployment: Deployment | None = None


def edge_key(a: str, b: str) -> tuple:
    if a == b:
        raise EcosystemError(f"self-loop connection at {a!r}")
    return (a, b) if a < b else (b, a)


class Ecosystem:
    """Habitats plus the weighted connection graph between them."""

    def __init__(self, habitats, w_min: float = W_MIN_DEFAULT):
        self.habitats: dict[str, Habitat] = {}
        for h in sorted(habitats, key=lambda h: h.id):
            if h.id in self.habitats:
                raise EcosystemError(f"duplicate habitat id: {h.id!r}")
            self.habitats[h.id] = h
        self.connections: dict[tuple, float] = {}
        self.epoch = 0
        self.w_min = w_min

    def habitat_ids(self) -> list[str]:
        return sorted(self.habitats)

    def add_connection(self, a: str, b: str, weight: float) -> None:
        key = edge_key(a, b)
        if a not in self.habitats or b not in self.habitats:
            raise EcosystemError(f"connection references unknown habitat: {key}")
        if weight < self.w_min:
            raise EcosystemError(f"weight below floor on {key}")
        self.connections[key] = weight

    def neighbors(self, hid: str) -> list:
        """Sorted (neighbor id, weight) pairs of a habitat."""
        out = []
        for (a, b), w in self.connections.items():
            if a == hid:
                out.append((b, w))
            elif b == hid:
                out.append((a, w))
        out.sort(key=lambda t: t[0])
        return out

    def connected(self) -> bool:
        ids = self.habitat_ids()
        if len(ids) <= 1:
            return True
        adj: dict[str, list] = {i: [] for i in ids}
        for a, b in self.connections:
            adj[a].append(b)
            adj[b].append(a)
        seen = {ids[0]}
        frontier = [ids[0]]
        while frontier:
            cur = frontier.pop()
            for nxt in adj[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return len(seen) == len(ids)

    def components(self) -> list:
        """Connected components as sorted id lists, ordered by smallest member."""
        ids = self.habitat_ids()
        adj: dict[str, list] = {i: [] for i in ids}
        for a, b in self.connections:
            adj[a].append(b)
            adj[b].append(a)
        seen: set[str] = set()
        comps = []
        for start in ids:
            if start in seen:
                continue
            comp = {start}
            frontier = [start]
            seen.add(start)
            while frontier:
                cur = frontier.pop()
                for nxt in adj[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        comp.add(nxt)
                        frontier.append(nxt)
            comps.append(sorted(comp))
        comps.sort(key=lambda c: c[0])
        return comps

    def to_dot(self) -> str:
        lines = ["graph ecosystem {"]
        for hid in self.habitat_ids():
            lines.append(f'  "{hid}";')
        for (a, b) in sorted(self.connections):
            w = self.connections[(a, b)]
            lines.append(f'  "{a}" -- "{b}" [label="{w:.4f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# --- Construction ---


def ring_edges(ids: list) -> list:
    ids = sorted(ids)
    edges = set()
    n = len(ids)
    for i in range(n):
        edges.add(edge_key(ids[i], ids[(i + 1) % n]))
    return sorted(edges)


def random_m_edges(ids: list, m: int, rng: Stream) -> list:
    """Each habitat draws m distinct peers; the undirected union is the edge set."""
    ids = sorted(ids)
    if m < 1 or m > len(ids) - 1:
        raise EcosystemError("random_m parameter out of range")
    edges = set()
    for hid in ids:
        candidates = [x for x in ids if x != hid]
        for _ in range(m):
            idx = rng.below(len(candidates))
            peer = candidates.pop(idx)
            edges.add(edge_key(hid, peer))
    return sorted(edges)


def build_ecosystem(habitats, topology, rng: Stream, w_min: float = W_MIN_DEFAULT,
                    max_retries: int = 100) -> Ecosystem:
    """Assemble habitats into a connected ecosystem at epoch 0.

    topology is ("ring",) or ("random_m", m). All connections start at
    weight 1.0. A disconnected random_m sample is redrawn up to max_retries
    times.
    """
    habitats = list(habitats)
    if len(habitats) < 2:
        raise EcosystemError("ecosystem needs at least 2 habitats")
    for h in habitats:
        if not h.profile:
            raise EcosystemError(f"habitat {h.id!r} has an empty request profile")
        for t in h.profile:
            if t.weight <= 0:
                raise EcosystemError(f"habitat {h.id!r} has a non-positive profile weight")
    eco = Ecosystem(habitats, w_min=w_min)
    ids = eco.habitat_ids()
    kind = topology[0]
    if kind == "ring":
        for a, b in ring_edges(ids):
            eco.add_connection(a, b, 1.0)
        return eco
    if kind == "random_m":
        m = topology[1]
        for _ in range(max_retries):
            eco.connections.clear()
            for a, b in random_m_edges(ids, m, rng):
                eco.add_connection(a, b, 1.0)
            if eco.connected():
                return eco
        raise EcosystemError("could not build connected topology")
    raise EcosystemError(f"unknown topology kind: {kind!r}")


# --- Connection dynamics ---


def reinforce(eco: Ecosystem, a: str, b: str, delta: float) -> float:
    """Strengthen the connection between two habitats; returns the new weight.

    A currently unconnected pair is first connected at the weight floor.
    """
    if delta <= 0:
        raise EcosystemError("reinforce delta must be > 0")
    key = edge_key(a, b)
    if a not in eco.habitats or b not in eco.habitats:
        raise EcosystemError(f"reinforce on unknown habitat pair {key}")
    if key not in eco.connections:
        eco.connections[key] = eco.w_min
    eco.connections[key] += delta
    return eco.connections[key]


def decay_all(eco: Ecosystem, decay_lambda: float) -> None:
    """Multiply every weight by decay_lambda, clamped at the floor."""
    if not (0.0 < decay_lambda <= 1.0):
        raise EcosystemError("decay out of range")
    for key in eco.connections:
        w = eco.connections[key] * decay_lambda
        eco.connections[key] = w if w > eco.w_min else eco.w_min


def profile_similarity(h1: Habitat, h2: Habitat) -> float:
    """Jaccard similarity of the attribute unions of two request profiles."""
    if not h1.profile or not h2.profile:
        raise EcosystemError("empty profile")
    u1: frozenset = frozenset()
    u2: frozenset = frozenset()
    for t in h1.profile:
        u1 |= t.request.req_attrs
    for t in h2.profile:
        u2 |= t.request.req_attrs
    union = u1 | u2
    if not union:
        return 0.0
    return len(u1 & u2) / len(union)


def clustering_statistic(eco: Ecosystem) -> float:
    """Pearson correlation between edge weight and endpoint profile similarity.

    Zero variance in either series yields 0. Edges are visited in sorted
    order so the float accumulation is reproducible.
    """
    keys = sorted(eco.connections)
    if len(keys) < 3:
        raise EcosystemError("clustering statistic needs at least 3 connections")
    xs = [eco.connections[k] for k in keys]
    ys = [profile_similarity(eco.habitats[k[0]], eco.habitats[k[1]]) for k in keys]
    n = len(keys)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sxx = syy = 0.0
    for x, y in zip(xs, ys):
        dx = x - mx
        dy = y - my
        sxy += dx * dy
        sxx += dx * dx
        syy += dy * dy
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    return sxy / math.sqrt(sxx * syy)


# --- Migration ---


def migrate(h: Habitat, eco: Ecosystem, p_mig: float, rng: Stream) -> list:
    """Spread the habitat's best deployed chain to weighted neighbors.

    Per constituent service, one uniform draw decides whether migration
    fires; if it does, one weighted draw picks the destination among the
    habitat's neighbors (sorted by id). The manifest is copied with its
    counters, provenance pointing at this habitat, unless the destination
    already holds that id (the draw is still consumed).
    """
    if h.last_deployment is None:
        return []
    neighbors = eco.neighbors(h.id)
    if not neighbors:
        return []
    weights = [w for _, w in neighbors]
    events = []
    for sid in h.last_deployment.genome:
        if rng.random() < p_mig:
            dest_id = neighbors[rng.weighted_index(weights)][0]
            dest = eco.habitats[dest_id]
            if sid not in dest.pool:
                dest.pool.add(h.pool.get(sid).copy())
                dest.provenance[sid] = h.id
                dest.pool_version += 1
                events.append(MigrationEvent(sid, h.id, dest_id, eco.epoch + 1))
    return events


# --- Failure and healing ---


def self_heal(eco: Ecosystem, lost: dict | None = None) -> list:
    """Repair the connection graph after habitat removal.

    For each removed habitat, its surviving former neighbors are connected
    pairwise (new edges only) at the minimum of the two lost weights. If
    the graph is still disconnected, the smallest habitat id of each
    component is connected to the globally smallest one at the weight
    floor. Returns the created edges as (a, b, weight) tuples.
    """
    created = []
    if lost:
        for victim in sorted(lost):
            neighbors = sorted(lost[victim])
            for i in range(len(neighbors)):
                for j in range(i + 1, len(neighbors)):
                    (na, wa), (nb, wb) = neighbors[i], neighbors[j]
                    key = edge_key(na, nb)
                    if key in eco.connections:
                        continue
                    w = min(wa, wb)
                    eco.connections[key] = w
                    created.append((key[0], key[1], w))
    comps = eco.components()
    if len(comps) > 1:
        reps = sorted(c[0] for c in comps)
        for rep in reps[1:]:
            key = edge_key(reps[0], rep)
            eco.connections[key] = eco.w_min
            created.append((key[0], key[1], eco.w_min))
    return created


def failure_inject(eco: Ecosystem, victims) -> tuple:
    """Remove habitats and their connections, then heal immediately.

    Returns (removed ids sorted, created edges). Removing every habitat is
    rejected; migrated copies hosted elsewhere survive their source.
    """
    victim_set = set(victims)
    unknown = victim_set - set(eco.habitats)
    if unknown:
        raise EcosystemError(f"unknown victim habitats: {sorted(unknown)}")
    if not victim_set:
        return [], []
    if victim_set >= set(eco.habitats):
        raise EcosystemError("total failure not modellable")
    lost: dict[str, list] = {}
    for victim in sorted(victim_set):
        lost[victim] = [
            (n, w) for n, w in eco.neighbors(victim) if n not in victim_set
        ]
    for victim in sorted(victim_set):
        del eco.habitats[victim]
    for key in [k for k in eco.connections if k[0] in victim_set or k[1] in victim_set]:
        del eco.connections[key]
    created = self_heal(eco, lost)
    return sorted(victim_set), created


# --- The epoch loop body ---


@dataclass
class EpochReport:
    epoch: int
    deployments: int = 0
    successes: int = 0
    migrations: list = field(default_factory=list)
    best_fitness: dict = field(default_factory=dict)  # habitat id -> deployed fitness


def run_epoch(eco: Ecosystem, evo_params: EvolutionParams, eco_params: EcosystemParams,
              generation_budget: int, streams: dict, execute, emit) -> EpochReport:
    """Advance the ecosystem by one epoch.

    Habitats are processed in id order. Per habitat (all draws from its own
    stream, in this order): sample a request from the profile, continue
    that template's evolution under the generation budget, deploy the best
    chain through `execute`, and record the feedback. Then three
    single-writer phases follow in id order: reinforcement of provenance
    edges used by successful deployments, migration of deployed chains,
    and one decay pass over all weights.

    `execute(chain, stream) -> bool` simulates chain execution; `emit(kind,
    payload)` receives the epoch's events.
    """
    report = EpochReport(epoch=eco.epoch + 1)
    ids = eco.habitat_ids()

    for hid in ids:
        h = eco.habitats[hid]
        rng = streams[hid]
        h.last_deployment = None
        idx = rng.weighted_index([t.weight for t in h.profile])
        req = h.profile[idx].request
        emit("request_sampled", {"habitat": hid, "request": req.id})
        if len(h.pool) == 0:
            emit("warning", {"habitat": hid, "message": "empty pool, epoch skipped"})
            continue

        state = h.active.get(req.id)
        if state is None:
            pop = init_population(h.pool, req, evo_params, rng)
            best, mean = population_stats(pop)
            state = ActiveEvolution(req.id, pop, pool_version=h.pool_version,
                                    trace=[GenerationStat(0, best, mean)])
            h.active[req.id] = state
        elif state.pool_version != h.pool_version:
            state.gens_since_reset = 0
            state.pool_version = h.pool_version

        best, _ = population_stats(state.population)
        if best < evo_params.target_fitness and state.gens_since_reset < evo_params.max_generations:
            steps = min(generation_budget, evo_params.max_generations - state.gens_since_reset)
            state.population, stats = advance(state.population, h.pool, req, evo_params, rng, steps)
            for b, m in stats:
                state.total_generations += 1
                state.gens_since_reset += 1
                state.trace.append(GenerationStat(state.total_generations, b, m))

        best_ind = best_individual(state.population)
        chain = h.pool.resolve(best_ind.genome)
        success = execute(chain, rng)
        record_deployment(chain, success)
        h.last_deployment = Deployment(req.id, best_ind.genome, best_ind.fitness, success)
        report.deployments += 1
        report.successes += 1 if success else 0
        report.best_fitness[hid] = best_ind.fitness
        emit("deployment", {
            "habitat": hid,
            "request": req.id,
            "chain": list(best_ind.genome),
            "fitness": best_ind.fitness,
            "success": success,
        })

    for hid in ids:
        h = eco.habitats[hid]
        d = h.last_deployment
        if d is None or not d.success:
            continue
        for sid in d.genome:
            src = h.provenance.get(sid)
            if src is not None and src in eco.habitats:
                w = reinforce(eco, hid, src, eco_params.reinforce_delta)
                a, b = edge_key(hid, src)
                emit("reinforcement", {"a": a, "b": b, "service": sid, "weight": w})

    for hid in ids:
        h = eco.habitats[hid]
        if h.last_deployment is None:
            continue
        for ev in migrate(h, eco, eco_params.p_mig, streams[hid]):
            report.migrations.append(ev)
            emit("migration", {
                "service": ev.service_id,
                "source": ev.source,
                "destination": ev.destination,
            })

    decay_all(eco, eco_params.decay_lambda)
    eco.epoch = report.epoch
    return report
