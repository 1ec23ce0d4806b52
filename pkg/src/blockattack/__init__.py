"""Black-box l-infinity attacks by lazy local search over +/-epsilon blocks."""

from .errors import AttackSucceeded, BudgetExhausted, ConfigurationError, DomainError
from .setfn import (
    LocalSearchConfig,
    SearchTrace,
    SetFunction,
    deletion_gain,
    is_local_optimum,
    lazy_greedy_delete,
    lazy_greedy_insert,
    local_search,
    marginal_gain,
    naive_greedy_delete,
    naive_greedy_insert,
    naive_local_search,
)
from .blocks import (
    AttackConfig,
    AttackResult,
    Block,
    BlockGrid,
    ImageSpec,
    NoiseCanvas,
    assemble_perturbation,
    build_ground_set,
    default_canvas,
    hierarchical_attack,
    partition_minibatches,
    split_blocks,
)
from .oracle import AttackObjective, LossReport, QueryLedger
from .models import (
    MLP,
    LabeledDataset,
    Layer,
    SoftmaxRegression,
    binary_logistic,
    fgsm,
    forward_loss,
    gen_synthetic,
    pgd,
    train_sgd,
    vertex_fraction,
)

__version__ = "0.1.0"
