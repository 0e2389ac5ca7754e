"""Portable NLP phenotyping: discharge summaries to OMOP CDM NOTE_NLP annotations."""

__version__ = "0.1.0"

NLP_SYSTEM = f"phenopipe {__version__}"
