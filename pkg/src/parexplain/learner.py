"""End-to-end learning: predicates -> transactions -> PARs -> RuleBook."""

from __future__ import annotations

import logging
import time

from .dataset import Dataset
from .mining import (
    LearningConfig,
    RuleBook,
    build_rulebook,
    fpgrowth_counts,
    generate_pars_from_counts,
    generate_univariate_pars,
    min_count_for,
)
from .predicates import encode_transactions, generate_predicates

logger = logging.getLogger(__name__)


def learn(train: Dataset, config: LearningConfig | None = None) -> RuleBook:
    """Learn a RuleBook from (presumed normal) training data."""
    if len(train) == 0:
        raise ValueError("empty dataset")
    config = (config or LearningConfig()).resolve(len(train))
    start = time.perf_counter()
    predicates = generate_predicates(train, config.theta, config.discretizer, config.bins)
    transactions = encode_transactions(train, predicates)
    n = len(train)
    counts = fpgrowth_counts(transactions, min_count_for(n, config.theta), config.max_antecedents + 1)
    mined = generate_pars_from_counts(counts, n, config.gamma)
    table, univariate = generate_univariate_pars(train, predicates)
    rb = build_rulebook(
        train.schema, table, mined, univariate, config, n_train=n, n_mined_predicates=len(predicates)
    )
    logger.info(
        "learned %d rules over %d predicates (%d frequent sets) in %.2fs",
        len(rb.rules),
        len(predicates),
        len(counts),
        time.perf_counter() - start,
    )
    return rb
