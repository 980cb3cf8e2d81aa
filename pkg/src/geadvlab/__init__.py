"""geadvlab: a desk-scale laboratory for gradient-edited adversarial GANs.

A small stack built from scratch on numpy: reverse-mode autodiff, compact
conv nets, an orthonormal 2D DCT with frequency-neighbor sampling, the
gradient-editing GAN training loop with its vanilla counterpart, FGSM and
momentum-iterative baselines, and a transfer/perturbation/throughput
evaluation harness.  Scikit-learn style estimators wrap the main pieces.

Submodule imports are lazy so the CLI can configure BLAS thread limits
before numpy is first loaded.
"""

from .errors import (AuditError, ConfigError, ContractError, CorruptionError,
                     DomainError, FormatError, GeAdvLabError, MeasurementError,
                     NumericalError, ShapeError)

__version__ = "0.1.0"

_LAZY = {
    "Tensor": ("autograd", "Tensor"),
    "backward": ("autograd", "backward"),
    "no_grad": ("autograd", "no_grad"),
    "RngStream": ("rng", "RngStream"),
    "TinyCnnClassifier": ("estimators", "TinyCnnClassifier"),
    "AdvGanAttack": ("estimators", "AdvGanAttack"),
    "FgsmAttack": ("estimators", "FgsmAttack"),
    "MimAttack": ("estimators", "MimAttack"),
}

__all__ = sorted(
    ["GeAdvLabError", "ShapeError", "DomainError", "ContractError",
     "ConfigError", "FormatError", "CorruptionError", "NumericalError",
     "AuditError", "MeasurementError", "__version__", *_LAZY]
)


def __getattr__(name):
    if name in _LAZY:
        import importlib

        module_name, attr = _LAZY[name]
        return getattr(importlib.import_module(f".{module_name}", __name__), attr)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
