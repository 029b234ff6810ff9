"""Conversational QA over RDF knowledge graphs.

Pipeline: parse an NTriples dump, induce a relational database and a
verbalized passage corpus from it, then answer conversational questions by
iteratively querying both (SQL + text retrieval) through a pluggable LLM
gateway, fusing the results into a cited answer.
"""

__version__ = "0.1.0"
