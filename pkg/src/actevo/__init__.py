"""Grammar-driven evolution of task-specific neural-network activation functions."""

from .expressions import (
    Binary,
    Bounded,
    Const,
    EvalOutcome,
    Expr,
    ExpressionError,
    Input,
    Pow,
    Unary,
    contains_input,
    derivative,
    evaluate,
    parse_text,
    sample_curve,
    to_text,
)
from .grammar import (
    GENOME_LENGTH,
    Grammar,
    GrammarError,
    MappingLimits,
    MappingOverflowError,
    MappingTrace,
    default_grammar,
    grammar_to_text,
    load_grammar,
    map_genotype,
    used_codon_count,
)
from .network import Network, NetworkConfig, TrainReport, forward, init_network, predict_labels, train
from .data import BUILTIN_SCHEMAS, DataError, Dataset, DatasetSchema, Split, load_csv, shuffle_split, standardize
from .metrics import MetricsReport, compute_metrics, fitness
from .evolution import (
    EvolutionConfig,
    Individual,
    RunReport,
    crossover,
    evaluate_individual,
    init_population,
    mutate,
    run,
    step_generation,
    tournament_select,
)

__version__ = "0.1.0"
