"""forge: build instruction-tuning datasets from existing corpora with open models.

The pipeline runs in stages: ingest passages, sample a working set, extract
output fragments, generate candidate instructions with a pluggable backend,
keep the candidate that minimizes output perplexity, and export the final
(instruction, output) records. Every stage is also exposed as a `forge`
subcommand and reads/writes line-delimited JSON so runs are resumable.
"""

__version__ = "0.1.0"
