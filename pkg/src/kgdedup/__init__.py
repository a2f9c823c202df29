"""Embedded duplicate-detection engine for knowledge graphs."""

from .compare import (
    Aggregation,
    Comparator,
    ComparisonConfig,
    DDConfig,
    DecisionConfig,
    PathRule,
    RunCache,
    ScoredPair,
    compare_instances,
    compare_literal,
    compare_path,
    decide,
    run_duplicate_detection,
    serialize_fields,
)
from .errors import (
    ConfigError,
    KgDedupError,
    ParseError,
    PlanError,
    SpaceTooLarge,
    SpecError,
    StoreError,
    StrategyError,
)
from .index import (
    FlatDocument,
    PreFilterConfig,
    Ref,
    TypeIndex,
    build_index,
    flatten,
    more_like_this,
    tokenize,
)
from .kg import (
    Blank,
    Graph,
    Iri,
    Literal,
    Triple,
    instances_of_type,
    parse_ntriples,
    resolve_path,
    serialize_ntriples,
)
from .learn import (
    LabelRecord,
    LabelStore,
    LearnState,
    MetricPrefs,
    MetricsReport,
    Strategy,
    StrategyStep,
    analyze,
    backward_elimination,
    better_than,
    brute_force,
    default_config,
    evaluate_against_truth,
    execute_strategy,
    forward_selection,
    genetic_search,
    hill_climb,
    next_to_label,
    simulate_learning_rounds,
)
from .schema import (
    DatatypeCategory,
    MinimalDomainSpec,
    PropertySpec,
    categorize_datatype,
    extract_domain_spec,
    infer_emergent_schema,
)
from .standardize import (
    StandardizationPlan,
    Standardizer,
    apply_plan,
    default_plan,
    standardize_list,
    standardize_value,
)

__version__ = "0.1.0"
