"""meibotune: parameter-efficient trainer glue over the clinical Q&A JSONL contract."""

__version__ = "0.1.0"
