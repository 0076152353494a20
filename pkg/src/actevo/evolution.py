"""The evolutionary loop over activation-function genotypes.

Each individual is a 30-codon genome.  Evaluation maps it to one expression
per network layer, trains a fresh network and scores it; mapping overflow,
non-finite training or guard trips on every batch mark the individual as
failed with fitness 0.  Selection is the two-group tournament of four,
recombination is single-point crossover with failed children falling back
to their parents, mutation rewrites one codon, and a single elite is exempt
from mutation.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import network as nn
from .data import Dataset, Split, shuffle_split, standardize
from .expressions import Expr, to_text
from .grammar import (
    GENOME_LENGTH,
    CODON_MAX,
    Grammar,
    GrammarError,
    MappingLimits,
    MappingOverflowError,
    default_grammar,
    map_genotype,
    random_genotype,
)
from .metrics import MetricsReport, compute_metrics, fitness

FITNESS_PRODUCT = "product"
FITNESS_TEST_F1 = "test_f1"

FAIL_MAPPING = "mapping"
FAIL_TRAINING = "training"
FAIL_GUARDS = "guards"


class InsufficientPopulationError(RuntimeError):
    """Tournament selection needs at least four individuals."""


@dataclass
class EvolutionConfig:
    population_size: int = 100
    generations: int = 500
    crossover_rate: float = 0.90
    mutation_rate: float = 0.20
    tournament_size: int = 4
    elitism_size: int = 1
    crossover_events_per_generation: int = 1
    fitness_mode: str = FITNESS_PRODUCT
    seed: int = 0

    def validate(self) -> None:
        if self.population_size < 1:
            raise ValueError("population_size must be at least 1")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {rate}")
        if self.tournament_size != 4:
            raise ValueError("the two-group tournament is fixed at size 4")
        if self.elitism_size != 1:
            raise ValueError("only elitism_size 1 is supported")
        if self.crossover_events_per_generation < 0:
            raise ValueError("crossover_events_per_generation must be non-negative")
        if self.fitness_mode not in (FITNESS_PRODUCT, FITNESS_TEST_F1):
            raise ValueError(
                f"fitness_mode must be {FITNESS_PRODUCT!r} or {FITNESS_TEST_F1!r}"
            )


@dataclass
class Individual:
    genotype: tuple[int, ...]
    phenotypes: list[Expr] | None = None
    metrics: MetricsReport | None = None
    validation_accuracy: float = 0.0
    fitness: float = 0.0
    evaluated: bool = False
    failure: str | None = None

    @property
    def test_f1(self) -> float:
        return self.metrics.f1 if self.metrics is not None else 0.0

    def phenotype_texts(self) -> list[str]:
        return [to_text(p) for p in self.phenotypes] if self.phenotypes else []

    def clone(self) -> "Individual":
        return copy.copy(self)


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    elite_fitness: float
    elite_phenotypes: list[str]
    failures: int

    def as_dict(self) -> dict:
        return {
            "generation": self.generation,
            "best_fitness": self.best_fitness,
            "mean_fitness": self.mean_fitness,
            "elite_fitness": self.elite_fitness,
            "elite_phenotypes": list(self.elite_phenotypes),
            "failures": self.failures,
        }


@dataclass
class RunReport:
    elite: Individual
    records: list[GenerationRecord]
    evaluations: int
    failures: int

    def as_dict(self) -> dict:
        return {
            "elite": {
                "genotype": list(self.elite.genotype),
                "phenotypes": self.elite.phenotype_texts(),
                "fitness": self.elite.fitness,
                "validation_accuracy": self.elite.validation_accuracy,
                "test_f1": self.elite.test_f1,
                "metrics": self.elite.metrics.as_dict() if self.elite.metrics else None,
                "failure": self.elite.failure,
            },
            "generations": [r.as_dict() for r in self.records],
            "evaluations": self.evaluations,
            "failures": self.failures,
        }


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labelled parts (order matters)."""
    digest = hashlib.sha256(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def init_population(evo: EvolutionConfig, rng) -> list[Individual]:
    """population_size fresh genomes, codons uniform in [0, 100], unevaluated."""
    return [Individual(genotype=random_genotype(rng)) for _ in range(evo.population_size)]


def evaluate_individual(
    ind: Individual,
    split: Split,
    net_cfg: nn.NetworkConfig,
    grammar: Grammar | None = None,
    limits: MappingLimits = MappingLimits(),
    run_seed: int = 0,
    fitness_mode: str = FITNESS_PRODUCT,
) -> Individual:
    """Map, train and score one individual in place.

    Already-evaluated individuals are returned untouched.  The training
    seed derives from (run_seed, genotype) so results do not depend on the
    order individuals are evaluated in.
    """
    if ind.evaluated:
        return ind
    ind.evaluated = True
    try:
        phenotypes, _ = map_genotype(ind.genotype, grammar, net_cfg.n_activations, limits)
    except (MappingOverflowError, GrammarError):
        ind.failure = FAIL_MAPPING
        return ind
    ind.phenotypes = phenotypes
    net = nn.init_network(net_cfg, phenotypes, seed=derive_seed("init", run_seed, ind.genotype))
    report = nn.train(
        net,
        split.X_train,
        split.y_train,
        split.X_val,
        split.y_val,
        net_cfg,
        seed=derive_seed("train", run_seed, ind.genotype),
    )
    if report.failed:
        ind.failure = FAIL_TRAINING
        return ind
    if report.all_batches_guarded:
        ind.failure = FAIL_GUARDS
        return ind
    ind.validation_accuracy = report.validation_accuracy
    ind.metrics = compute_metrics(split.y_test, nn.predict_labels(net, split.X_test))
    if fitness_mode == FITNESS_TEST_F1:
        ind.fitness = ind.metrics.f1
    else:
        ind.fitness = fitness(ind.validation_accuracy, ind.metrics.f1)
    return ind


def sample_tournament_entrants(population_size: int, rng) -> list[int]:
    """Four distinct population indices drawn uniformly, in sampled order."""
    if population_size < 4:
        raise InsufficientPopulationError(
            f"tournament needs a population of at least 4, got {population_size}"
        )
    return [int(i) for i in rng.choice(population_size, size=4, replace=False)]


def _pair_winner(population: list[Individual], i: int, j: int) -> int:
    a, b = population[i], population[j]
    key_i = (a.test_f1, a.fitness, -i)
    key_j = (b.test_f1, b.fitness, -j)
    return i if key_i >= key_j else j


def tournament_select(population: list[Individual], rng) -> tuple[int, int]:
    """Two-group tournament: four distinct entrants split into two pairs in
    sampled order; each pair's higher test F1 wins (ties: higher fitness,
    then lower index).  Returns the winners' population indices."""
    entrants = sample_tournament_entrants(len(population), rng)
    return (
        _pair_winner(population, entrants[0], entrants[1]),
        _pair_winner(population, entrants[2], entrants[3]),
    )


def crossover(a: Individual, b: Individual, rng) -> tuple[Individual, Individual]:
    """Single-point splice at a uniform point in [1, 29]; children unevaluated."""
    point = int(rng.integers(1, GENOME_LENGTH))
    child1 = Individual(genotype=a.genotype[:point] + b.genotype[point:])
    child2 = Individual(genotype=b.genotype[:point] + a.genotype[point:])
    return child1, child2


def mutate(ind: Individual, rng) -> Individual:
    """Rewrite one uniformly chosen codon (used or not) with a uniform value."""
    index = int(rng.integers(0, GENOME_LENGTH))
    value = int(rng.integers(0, CODON_MAX + 1))
    genotype = ind.genotype[:index] + (value,) + ind.genotype[index + 1 :]
    return Individual(genotype=genotype)


@dataclass
class EvolutionState:
    population: list[Individual]
    elite: Individual
    elite_slot: int | None
    generation: int = 0
    records: list[GenerationRecord] = field(default_factory=list)
    evaluations: int = 0
    failures: int = 0


def _refresh_elite(state: EvolutionState) -> None:
    best = max(range(len(state.population)), key=lambda i: state.population[i].fitness)
    if state.population[best].fitness > state.elite.fitness:
        state.elite = state.population[best].clone()
        state.elite_slot = best


def step_generation(state: EvolutionState, evo: EvolutionConfig, rng, evaluate_fn) -> None:
    """Advance one generation in place.

    Order of operations: elite refresh, crossover events (failed children
    are discarded and their parent kept), mutation over non-elite slots,
    then a generation record.  All randomness flows through ``rng`` in this
    fixed order, so a seeded rng makes the step reproducible.
    """
    population = state.population
    _refresh_elite(state)
    failures_before = state.failures

    for _ in range(evo.crossover_events_per_generation):
        if rng.random() >= evo.crossover_rate:
            continue
        slot_a, slot_b = tournament_select(population, rng)
        child1, child2 = crossover(population[slot_a], population[slot_b], rng)
        for slot, child in ((slot_a, child1), (slot_b, child2)):
            child = evaluate_fn(child)
            state.evaluations += 1
            if child.failure is not None:
                state.failures += 1
                continue
            population[slot] = child
            if slot == state.elite_slot:
                state.elite_slot = None

    for slot in range(len(population)):
        if slot == state.elite_slot:
            continue
        if rng.random() < evo.mutation_rate:
            mutant = evaluate_fn(mutate(population[slot], rng))
            state.evaluations += 1
            if mutant.failure is not None:
                state.failures += 1
            population[slot] = mutant

    fitnesses = [ind.fitness for ind in population]
    best = max(fitnesses)
    mean = sum(fitnesses) / len(fitnesses)
    assert best >= mean
    state.records.append(
        GenerationRecord(
            generation=state.generation,
            best_fitness=best,
            mean_fitness=mean,
            elite_fitness=state.elite.fitness,
            elite_phenotypes=state.elite.phenotype_texts(),
            failures=state.failures - failures_before,
        )
    )
    state.generation += 1


def run(
    dataset: Dataset,
    evo: EvolutionConfig,
    net_cfg: nn.NetworkConfig,
    grammar: Grammar | None = None,
    limits: MappingLimits = MappingLimits(),
    standardize_features: bool = True,
) -> RunReport:
    """Full evolutionary run on one dataset.

    Splits and (by default) standardizes the data with the run seed,
    evaluates a fresh population and iterates ``evo.generations`` steps.
    Identical configuration and seed reproduce the report exactly.
    """
    evo.validate()
    split = shuffle_split(dataset, seed=evo.seed)
    if standardize_features:
        split = standardize(split)
    net_cfg = replace(net_cfg, n_features=split.X_train.shape[1])
    grammar = grammar if grammar is not None else default_grammar()

    def evaluate_fn(ind: Individual) -> Individual:
        return evaluate_individual(
            ind, split, net_cfg, grammar, limits, evo.seed, evo.fitness_mode
        )

    rng = np.random.default_rng(derive_seed("evolution", evo.seed))
    population = init_population(evo, rng)
    failures = 0
    for ind in population:
        evaluate_fn(ind)
        failures += int(ind.failure is not None)

    best = max(range(len(population)), key=lambda i: population[i].fitness)
    state = EvolutionState(
        population=population,
        elite=population[best].clone(),
        elite_slot=best,
        evaluations=len(population),
        failures=failures,
    )
    for _ in range(evo.generations):
        step_generation(state, evo, rng, evaluate_fn)
    _refresh_elite(state)
    return RunReport(
        elite=state.elite,
        records=state.records,
        evaluations=state.evaluations,
        failures=state.failures,
    )
