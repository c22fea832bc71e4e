"""Two-stage caption proxy-space regularization for audio captioning.

Stage 1 (:mod:`proxyreg.proxy_space`) learns a caption embedding space with a
centroid-based contrastive loss and exports one centroid per clip. Stage 2
(:mod:`proxyreg.captioner`) trains an encoder/attention-GRU captioner whose
pooled decoder output is pulled toward those centroids.
"""

from .errors import (
    ConfigError, ContractError, DataError, DimensionError, DomainError, NumericalError, ProxyRegError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractError", "DataError", "DimensionError", "DomainError",
    "NumericalError", "ProxyRegError", "__version__",
]
