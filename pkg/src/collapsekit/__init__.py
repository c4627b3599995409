"""collapsekit: numerical collapsibility analysis of association measures.

The package evaluates conditional and marginal association measures
(expectation dependence, mixed interaction derivative, log-expectation
dependence, distribution dependence) for declaratively specified
conditional models (Y, X, W), and decides simple and average
collapsibility over the covariate W on user grids.  A scenario catalog
ships worked examples with closed-form ground truth, and a CLI exposes
scenario runs, config-driven checks, and regression studies.
"""

__version__ = "0.1.0"
