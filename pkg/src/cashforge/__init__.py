"""cash-forge: algorithm selection and hyperparameter tuning from curated
literature experiences.

The package turns (paper, dataset, winner, losers) experience records into
(dataset, best algorithm) knowledge via a reliability-weighted relation graph,
trains a neural decision model over dataset meta-features, and tunes the
selected classifier with a genetic or Bayesian optimizer chosen by probing the
evaluation cost.
"""

__version__ = "0.1.0"
