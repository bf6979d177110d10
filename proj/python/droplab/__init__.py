"""Random dropping for graph neural networks: graphs, masks, theory checks and studies."""

from ._droplab import (  # noqa: F401
    DROPPING_KINDS,
    Graph,
    config_defaults,
    diversity_rate_bound,
    entropy_clean,
    entropy_expected,
    load_dataset,
    make_regular_graph,
    make_sbm,
    perturb_add_edges,
    regularization_check,
    rewire,
    run_experiment,
    save_dataset,
    variance_closed_form,
    variance_monte_carlo,
)

__all__ = [name for name in dir() if not name.startswith("_")]
