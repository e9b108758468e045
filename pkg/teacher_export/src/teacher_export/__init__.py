"""Teacher-side exporter: BERT distributions to TDR1 files, plus golden
tokenizer references, for training matrix-embedding students offline."""

from .export import ExportJob, export_mlm, export_task, golden_tokens
from .tdr import write_records

__version__ = "0.1.0"

__all__ = ["ExportJob", "export_mlm", "export_task", "golden_tokens", "write_records"]
