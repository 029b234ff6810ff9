"""Identifier and label derivation from IRIs."""

from __future__ import annotations

import re

RDF_TYPE_IRI = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def local_name(iri: str) -> str:
    """Strip namespace prefixes: everything up to the last /, # or :."""
    for sep in ("/", "#", ":"):
        if sep in iri:
            iri = iri.rsplit(sep, 1)[1] or iri
    return iri


def split_words(text: str) -> list[str]:
    """Split an identifier on camelCase boundaries, hyphens and underscores."""
    parts = re.split(r"[-_\s]+", text)
    words: list[str] = []
    for part in parts:
        if not part:
            continue
        words.extend(w for w in _CAMEL_RE.split(part) if w)
    return words


def snake_name(iri: str) -> str:
    """Lowercase snake_case identifier from an IRI's local name."""
    words = split_words(local_name(iri))
    return "_".join(w.lower() for w in words) or "value"


def slug(iri: str) -> str:
    """Last path segment of an entity IRI, used as its primary-key value."""
    return local_name(iri)
