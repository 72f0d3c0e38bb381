"""Natural indirect effect estimation with identification-robust moments."""

from ._core import (  # noqa: F401
    __version__,
    generate_dataset,
    genius_theta_m,
    het_variance_test,
    nie,
    nie_oracle,
    rr_nie,
    run_study,
)

__all__ = [
    "__version__",
    "generate_dataset",
    "genius_theta_m",
    "het_variance_test",
    "nie",
    "nie_oracle",
    "rr_nie",
    "run_study",
]
