"""Rule-based rendering of entity capsules into natural-language passages.

Each capsule becomes one passage: the type fact as "<Subject> is <Type>.",
every other fact as a forward "has" sentence immediately followed by its
reverse formulation, so the same information is retrievable when asked in
complementary directions.
"""

from __future__ import annotations

from dataclasses import dataclass

from .naming import local_name, slug, split_words
from .induction import InductionConfig
from .rdf import EntityCapsule, TermKind


@dataclass(frozen=True)
class Passage:
    id: str
    text: str
    source_kind: str  # "kg_capsule" | "external_document"
    subject_iri: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "sourceKind": self.source_kind,
            "subjectIri": self.subject_iri,
        }

    @staticmethod
    def from_dict(data: dict) -> "Passage":
        return Passage(
            id=data["id"],
            text=data["text"],
            source_kind=data["sourceKind"],
            subject_iri=data.get("subjectIri"),
        )


KG_CAPSULE = "kg_capsule"
EXTERNAL_DOCUMENT = "external_document"


@dataclass
class CasingConfig:
    acronyms: frozenset[str] = frozenset()
    lowercase: bool = False  # demo mode: all text lowercased


def label_from_iri(iri: str, casing: CasingConfig | None = None, title: bool = True) -> str:
    """Human label from an IRI's last path segment.

    Tokens in the acronym map are uppercased, numeric tokens kept; the rest
    are title-cased (or left lowercase when title=False, used for entity
    objects whose capitalization is decided by sentence position).
    """
    casing = casing or CasingConfig()
    words = split_words(local_name(iri))
    out = []
    for w in words:
        if casing.lowercase:
            out.append(w.lower())
        elif w.lower() in casing.acronyms:
            out.append(w.upper())
        elif w.isdigit():
            out.append(w)
        elif title:
            out.append(w[:1].upper() + w[1:].lower())
        else:
            out.append(w.lower())
    return " ".join(out)


def predicate_to_phrase(predicate_iri: str) -> str:
    """Strip namespace prefixes and split into lowercase words."""
    return " ".join(w.lower() for w in split_words(local_name(predicate_iri)))


def _capitalize_sentence(sentence: str, casing: CasingConfig) -> str:
    if casing.lowercase:
        return sentence.lower()
    for i, ch in enumerate(sentence):
        if ch.isalpha():
            return sentence[:i] + ch.upper() + sentence[i + 1 :]
        if ch.isdigit():
            return sentence  # numeric-initial sentences kept as-is
    return sentence


def verbalize_capsule(
    capsule: EntityCapsule,
    casing: CasingConfig | None = None,
    induction_config: InductionConfig | None = None,
) -> Passage:
    """One passage per capsule; type facts get one sentence, others two."""
    casing = casing or CasingConfig()
    cfg = induction_config or InductionConfig()
    subject_label = label_from_iri(capsule.subject.lexical, casing)
    sentences: list[str] = []
    for triple in capsule.triples:
        pred = triple.predicate.lexical
        obj = triple.object
        if cfg.is_type_predicate(pred) and obj.kind is TermKind.IRI:
            type_label = label_from_iri(obj.lexical, casing)
            sentences.append(
                _capitalize_sentence(f"{subject_label} is {type_label}.", casing)
            )
            continue
        phrase = predicate_to_phrase(pred)
        if obj.kind is TermKind.LITERAL:
            obj_text = obj.lexical
        else:
            obj_text = label_from_iri(obj.lexical, casing, title=False)
        sentences.append(
            _capitalize_sentence(
                f"{subject_label} has {phrase} {obj_text}.", casing
            )
        )
        sentences.append(
            _capitalize_sentence(
                f"{obj_text} is {phrase} of {subject_label}.", casing
            )
        )
    return Passage(
        id=slug(capsule.subject.lexical),
        text=" ".join(sentences),
        source_kind=KG_CAPSULE,
        subject_iri=capsule.subject.lexical,
    )


def verbalize_capsules(
    capsules: list[EntityCapsule],
    casing: CasingConfig | None = None,
    induction_config: InductionConfig | None = None,
) -> list[Passage]:
    return [verbalize_capsule(c, casing, induction_config) for c in capsules]
