"""Wasserstein gradient flows of permanental and toric energies."""

from ._core import (
    CapExceeded,
    ConfigError,
    Polytope,
    WgflowError,
    __version__,
    cole_hopf,
    entropy,
    fisher_information,
    from_samples,
    isotonic_project,
    load_config,
    log_permanent,
    ma_static,
    newtonian_closed_form,
    newtonian_energy,
    normal_quantile,
    permanent_marginals,
    run_config,
    selftest,
    uniform_quantile,
    wasserstein2,
    wasserstein2_discrete,
)

__all__ = [
    "CapExceeded",
    "ConfigError",
    "Polytope",
    "WgflowError",
    "__version__",
    "cole_hopf",
    "entropy",
    "fisher_information",
    "from_samples",
    "isotonic_project",
    "load_config",
    "log_permanent",
    "ma_static",
    "newtonian_closed_form",
    "newtonian_energy",
    "normal_quantile",
    "permanent_marginals",
    "run_config",
    "selftest",
    "uniform_quantile",
    "wasserstein2",
    "wasserstein2_discrete",
]
