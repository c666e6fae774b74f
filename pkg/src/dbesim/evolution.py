"""Genetic evolution of service supply chains against a request.

An individual is an ordered sequence of service ids drawn from a catalog.
Selection is by tournament, recombination is one-point crossover, and
mutation inserts, deletes, or replaces a single gene. Run-time feedback
enters as a replication weight: services with a better success record are
proportionally more likely to be drawn whenever a gene is sampled.

Draw order per generation is fixed and documented on each operator, so a
whole evolution is a pure function of (catalog snapshot, request, params,
stream state).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .manifest import (
    Catalog,
    Request,
    ServiceManifest,
    chain_price,
    fitness,
)
from .rng import Stream

ChainGenome = tuple  # ordered service ids, length 1..request.max_len

ORACLE_GUARD = 10**6


class EvolutionError(ValueError):
    pass


@dataclass(frozen=True)
class Individual:
    """A chain genome with its cached fitness."""

    genome: ChainGenome
    fitness: float


@dataclass(frozen=True)
class EvolutionParams:
    population_size: int = 100
    max_generations: int = 200
    tournament_size: int = 3
    crossover_rate: float = 0.7
    mutation_rate: float = 0.3
    elitism: int = 1
    beta: float = 0.3
    gamma: float = 2.0
    target_fitness: float = 0.999

    def validate(self) -> list[str]:
        bad = []
        if self.population_size < 2:
            bad.append("population_size must be >= 2")
        if self.max_generations < 1:
            bad.append("max_generations must be >= 1")
        if self.tournament_size < 1:
            bad.append("tournament_size must be >= 1")
        if not (0.0 <= self.crossover_rate <= 1.0):
            bad.append("crossover_rate out of range")
        if not (0.0 <= self.mutation_rate <= 1.0):
            bad.append("mutation_rate out of range")
        if self.elitism < 0 or self.elitism >= self.population_size:
            bad.append("elitism must be in [0, population_size)")
        if not (0.0 <= self.beta < 1.0):
            bad.append("beta out of range")
        if self.gamma < 0.0:
            bad.append("gamma must be >= 0")
        if not (0.0 < self.target_fitness <= 1.0):
            bad.append("target_fitness out of range")
        return bad


@dataclass(frozen=True)
class GenerationStat:
    generation: int
    best_fitness: float
    mean_fitness: float


@dataclass
class EvolutionTrace:
    """Per-generation statistics plus the final best individual."""

    generations: list = field(default_factory=list)
    best: Individual | None = None

    def to_csv(self) -> str:
        lines = ["generation,best_fitness,mean_fitness"]
        for g in self.generations:
            lines.append(f"{g.generation},{g.best_fitness!r},{g.mean_fitness!r}")
        return "\n".join(lines) + "\n"


# --- Feedback-weighted gene sampling ---


def replication_weight(s: ServiceManifest, gamma: float) -> float:
    """Sampling weight of a service given its usage feedback (>= 1).

    Services with no usage history weigh 1; a perfect success record weighs
    1 + gamma. Failures confer no bonus beyond the baseline.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if s.usage_count > 0:
        return 1.0 + gamma * (s.success_count / s.usage_count)
    return 1.0


def draw_service(catalog: Catalog, gamma: float, rng: Stream) -> ServiceManifest:
    """Sample a service with probability proportional to replication weight.

    Consumes exactly one draw. Weights are accumulated in catalog insertion
    order.
    """
    services = list(catalog)
    if not services:
        raise EvolutionError("empty catalog")
    idx = rng.weighted_index([replication_weight(s, gamma) for s in services])
    return services[idx]


# --- Evaluation ---


def evaluate_genome(genome: ChainGenome, catalog: Catalog, req: Request, params: EvolutionParams) -> float:
    """Fitness of a genome; chains priced over the request budget score 0."""
    chain = catalog.resolve(genome)
    if req.budget is not None and chain_price(chain) > req.budget:
        return 0.0
    return fitness(chain, req, params.beta)


def population_stats(pop) -> tuple[float, float]:
    """(best, mean) fitness, accumulated in population index order."""
    best = 0.0
    total = 0.0
    for ind in pop:
        total += ind.fitness
        if ind.fitness > best:
            best = ind.fitness
    return best, total / len(pop)


def best_individual(pop) -> Individual:
    """Highest-fitness individual; ties broken by lower population index."""
    best_i = 0
    for i in range(1, len(pop)):
        if pop[i].fitness > pop[best_i].fitness:
            best_i = i
    return pop[best_i]


# --- Operators ---


def init_population(catalog: Catalog, req: Request, params: EvolutionParams, rng: Stream) -> list:
    """Random initial population.

    Per individual: one draw for the genome length (uniform in 1..max_len),
    then one weighted draw per gene.
    """
    if len(catalog) == 0:
        raise EvolutionError("empty catalog")
    pop = []
    for _ in range(params.population_size):
        length = 1 + rng.below(req.max_len)
        genome = tuple(draw_service(catalog, params.gamma, rng).id for _ in range(length))
        pop.append(Individual(genome, evaluate_genome(genome, catalog, req, params)))
    return pop


def tournament_select(pop, k: int, rng: Stream) -> Individual:
    """Best of k uniform draws with replacement; ties favor the lower index.

    Consumes exactly k draws.
    """
    best_i = -1
    for _ in range(k):
        i = rng.below(len(pop))
        if best_i < 0 or (-pop[i].fitness, i) < (-pop[best_i].fitness, best_i):
            best_i = i
    return pop[best_i]


def crossover(a: ChainGenome, b: ChainGenome, max_len: int, rng: Stream) -> tuple:
    """One-point crossover; consumes two draws (one cut point per parent).

    Children are prefix(a)+suffix(b) and prefix(b)+suffix(a), truncated to
    max_len; a child that would come out empty is replaced by a copy of the
    parent that contributed its prefix.
    """
    cut_a = rng.below(len(a) + 1)
    cut_b = rng.below(len(b) + 1)
    child1 = a[:cut_a] + b[cut_b:]
    child2 = b[:cut_b] + a[cut_a:]
    child1 = child1[:max_len] if child1 else tuple(a)
    child2 = child2[:max_len] if child2 else tuple(b)
    return child1, child2


def mutate(g: ChainGenome, catalog: Catalog, req: Request, rng: Stream, gamma: float) -> ChainGenome:
    """Apply one of insert / delete / replace, chosen uniformly.

    Draw order: operator, then position, then gene (where applicable).
    Insert is skipped at the length ceiling and delete at the floor, in
    which case no further draws are consumed.
    """
    op = rng.below(3)
    if op == 0:  # insert
        if len(g) >= req.max_len:
            return g
        pos = rng.below(len(g) + 1)
        svc = draw_service(catalog, gamma, rng)
        return g[:pos] + (svc.id,) + g[pos:]
    if op == 1:  # delete
        if len(g) <= 1:
            return g
        pos = rng.below(len(g))
        return g[:pos] + g[pos + 1:]
    pos = rng.below(len(g))  # replace
    svc = draw_service(catalog, gamma, rng)
    return g[:pos] + (svc.id,) + g[pos + 1:]


def step_generation(pop, catalog: Catalog, req: Request, params: EvolutionParams, rng: Stream) -> list:
    """Produce the next generation, preserving population size.

    The top-elitism individuals (ties by index) carry over unchanged. Each
    offspring pair consumes draws in the order: selection pair, crossover
    decision, cut points (if crossover fires), then per child a mutation
    decision and the mutation's own draws.
    """
    size = len(pop)
    order = sorted(range(size), key=lambda i: (-pop[i].fitness, i))
    next_pop = [pop[i] for i in order[: params.elitism]]
    while len(next_pop) < size:
        p1 = tournament_select(pop, params.tournament_size, rng)
        p2 = tournament_select(pop, params.tournament_size, rng)
        if rng.random() < params.crossover_rate:
            c1, c2 = crossover(p1.genome, p2.genome, req.max_len, rng)
        else:
            c1, c2 = p1.genome, p2.genome
        for child in (c1, c2):
            if len(next_pop) >= size:
                break
            if rng.random() < params.mutation_rate:
                child = mutate(child, catalog, req, rng, params.gamma)
            next_pop.append(Individual(child, evaluate_genome(child, catalog, req, params)))
    return next_pop


def advance(pop, catalog: Catalog, req: Request, params: EvolutionParams, rng: Stream,
            max_steps: int) -> tuple:
    """Run up to max_steps generations, stopping once target fitness is hit.

    Returns (population, per-step (best, mean) stats). The caller owns
    generation numbering.
    """
    stats = []
    for _ in range(max_steps):
        best, _ = population_stats(pop)
        if best >= params.target_fitness:
            break
        pop = step_generation(pop, catalog, req, params, rng)
        stats.append(population_stats(pop))
    return pop, stats


def evolve(catalog: Catalog, req: Request, params: EvolutionParams, rng: Stream) -> EvolutionTrace:
    """Evolve until target fitness or the generation cap is reached."""
    pop = init_population(catalog, req, params, rng)
    best, mean = population_stats(pop)
    trace = EvolutionTrace()
    trace.generations.append(GenerationStat(0, best, mean))
    pop, stats = advance(pop, catalog, req, params, rng, params.max_generations)
    for i, (b, m) in enumerate(stats, start=1):
        trace.generations.append(GenerationStat(i, b, m))
    trace.best = best_individual(pop)
    return trace


# --- Exhaustive oracle ---


def brute_force_best(catalog: Catalog, req: Request, beta: float = 0.3,
                     guard: int = ORACLE_GUARD) -> tuple:
    """Exhaustively find the best chain of length 1..max_len.

    Chains are enumerated by increasing length, ids in lexicographic order
    within each length; the first chain attaining the maximum fitness wins.
    Budget-infeasible chains are excluded; if none is feasible the result
    is (None, 0.0).
    """
    n = len(catalog)
    if n == 0:
        raise EvolutionError("empty catalog")
    if n ** req.max_len > guard:
        raise EvolutionError("oracle too large")
    ids = sorted(catalog.ids())
    best_genome = None
    best_fit = -1.0
    for k in range(1, req.max_len + 1):
        for combo in itertools.product(ids, repeat=k):
            chain = catalog.resolve(combo)
            if req.budget is not None and chain_price(chain) > req.budget:
                continue
            f = fitness(chain, req, beta)
            if f > best_fit:
                best_fit = f
                best_genome = combo
    if best_genome is None:
        return None, 0.0
    return best_genome, best_fit


# --- Run-time feedback ---


def record_deployment(chain, success: bool) -> None:
    """Bump usage counters of every chain member; successes bump both."""
    for s in chain:
        s.usage_count += 1
        if success:
            s.success_count += 1
