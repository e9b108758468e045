"""Order-aware matrix-embedding sequence encoders.

Words are embedded as square matrices (multiplied along the sequence,
hence order-sensitive) and/or vectors (summed, order-insensitive); the
hybrid concatenates both.  The package covers bidirectional variants,
per-token representations for masked-LM pretraining, distillation from
precomputed teacher logits, the DiffCat two-sequence encoding, and a CLI
for pretraining / fine-tuning / encoding / evaluation / benchmarking.
"""

from . import (
    checkpoint,
    data_metrics,
    distillation_io,
    embeddings,
    encoder,
    errors,
    heads,
    linalg,
    tokenizer,
    training,
)

__version__ = "0.1.0"

__all__ = [
    "checkpoint",
    "data_metrics",
    "distillation_io",
    "embeddings",
    "encoder",
    "errors",
    "heads",
    "linalg",
    "tokenizer",
    "training",
    "__version__",
]
