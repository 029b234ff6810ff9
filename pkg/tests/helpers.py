"""Shared fixtures: a tiny car KG, randomized KG generation, and an
independent brute-force reconstruction oracle for losslessness checks."""

from __future__ import annotations

import json
import random
import sqlite3

from kgqa.naming import RDF_TYPE_IRI, slug
from kgqa.rdf import Term, TermKind, Triple

EX = "http://ex.org"
TYPE = Term.iri(RDF_TYPE_IRI)

# three cars (heights 1500/1600/1700), two engines, two equipments
TINY_KG = """\
<http://ex.org/car/x1-a> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://ex.org/type/car> .
<http://ex.org/car/x1-a> <http://ex.org/p/height> "1500 mm" .
<http://ex.org/car/x1-a> <http://ex.org/p/price> "37450 EUR" .
<http://ex.org/car/x1-a> <http://ex.org/p/engineSpecification> <http://ex.org/engine/e-small> .
<http://ex.org/car/x1-a> <http://ex.org/p/hasEquipment> <http://ex.org/equipment/led-lights> .
<http://ex.org/car/x1-a> <http://ex.org/p/hasEquipment> <http://ex.org/equipment/sunroof> .
<http://ex.org/car/x1-b> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://ex.org/type/car> .
<http://ex.org/car/x1-b> <http://ex.org/p/height> "1600 mm" .
<http://ex.org/car/x1-b> <http://ex.org/p/price> "42500 EUR" .
<http://ex.org/car/x1-b> <http://ex.org/p/engineSpecification> <http://ex.org/engine/e-small> .
<http://ex.org/car/x1-b> <http://ex.org/p/hasEquipment> <http://ex.org/equipment/led-lights> .
<http://ex.org/car/coupe-c> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://ex.org/type/car> .
<http://ex.org/car/coupe-c> <http://ex.org/p/height> "1700 mm" .
<http://ex.org/car/coupe-c> <http://ex.org/p/engineSpecification> <http://ex.org/engine/e-big> .
<http://ex.org/car/coupe-c> <http://ex.org/p/hasEquipment> <http://ex.org/equipment/sunroof> .
<http://ex.org/engine/e-small> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://ex.org/type/engine> .
<http://ex.org/engine/e-small> <http://ex.org/p/enginePerformance> "125 kW" .
<http://ex.org/engine/e-big> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://ex.org/type/engine> .
<http://ex.org/engine/e-big> <http://ex.org/p/enginePerformance> "250 kW" .
<http://ex.org/equipment/led-lights> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://ex.org/type/equipment> .
<http://ex.org/equipment/led-lights> <http://ex.org/p/description> "adaptive LED headlights" .
<http://ex.org/equipment/sunroof> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://ex.org/type/equipment> .
<http://ex.org/equipment/sunroof> <http://ex.org/p/description> "panoramic sunroof" .
"""


def write_script(path, rules: list[dict]):
    path.write_text(json.dumps(rules, indent=2), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# randomized KGs for losslessness fuzzing

_UNITS = ["EUR", "mm", "kW", "kg", "s", "km"]
_WORDS = ["alpha", "beta", "gamma", "delta", "grey", "blue", "sport", "eco"]


def random_kg(seed: int, max_triples: int = 1000) -> list[Triple]:
    rng = random.Random(seed)
    n_types = rng.randint(2, 5)
    types = [f"type{t}" for t in range(n_types)]
    entities = {
        t: [Term.iri(f"{EX}/{t}/{t}-e{i}") for i in range(rng.randint(2, 15))]
        for t in types
    }
    triples: list[Triple] = []
    for t in types:
        type_term = Term.iri(f"{EX}/types/{t}")
        for e in entities[t]:
            triples.append(Triple(e, TYPE, type_term))

    pred_counter = 0

    def new_pred() -> Term:
        nonlocal pred_counter
        pred_counter += 1
        return Term.iri(f"{EX}/p/pred{pred_counter}")

    for t in types:
        for _ in range(rng.randint(1, 4)):
            pred = new_pred()
            style = rng.choice(["int_unit", "real_unit", "int", "text", "mixed"])
            multivalued = rng.random() < 0.15
            unit = rng.choice(_UNITS)
            for e in entities[t]:
                if rng.random() < 0.25:
                    continue  # nullable column
                repeats = rng.randint(2, 3) if multivalued and rng.random() < 0.5 else 1
                for _ in range(repeats):
                    if style == "int_unit":
                        value = f"{rng.randint(1, 99999)} {unit}"
                    elif style == "real_unit":
                        value = f"{rng.randint(1, 99)}.{rng.randint(0, 9)} {unit}"
                    elif style == "int":
                        value = str(rng.randint(-500, 99999))
                    elif style == "text":
                        value = " ".join(rng.sample(_WORDS, rng.randint(1, 3)))
                    else:
                        value = rng.choice(
                            [str(rng.randint(0, 999)), rng.choice(_WORDS)]
                        )
                    triples.append(Triple(e, pred, Term.literal(value)))

    # relations with controlled cardinality shapes
    for _ in range(rng.randint(1, 3)):
        subj_type, obj_type = rng.choice(types), rng.choice(types)
        if subj_type == obj_type:
            continue
        pred = new_pred()
        subjects, objects = entities[subj_type], entities[obj_type]
        pattern = rng.choice(["functional", "inverse", "one_to_one", "many_many"])
        if pattern == "functional":
            for s in subjects:
                triples.append(Triple(s, pred, rng.choice(objects)))
        elif pattern == "inverse":
            pool = list(objects)
            rng.shuffle(pool)
            while pool:
                s = rng.choice(subjects)
                take = min(rng.randint(1, 3), len(pool))
                for o in pool[:take]:
                    triples.append(Triple(s, pred, o))
                pool = pool[take:]
        elif pattern == "one_to_one":
            for s, o in zip(subjects, objects):
                triples.append(Triple(s, pred, o))
        else:
            seen = set()
            for _ in range(min(len(subjects) * 2, 30)):
                s, o = rng.choice(subjects), rng.choice(objects)
                if (s, o) not in seen:
                    seen.add((s, o))
                    triples.append(Triple(s, pred, o))
            # guarantee the N:M shape
            if len(subjects) >= 2 and len(objects) >= 2:
                for pair in [
                    (subjects[0], objects[0]),
                    (subjects[0], objects[1]),
                    (subjects[1], objects[0]),
                ]:
                    if pair not in seen:
                        seen.add(pair)
                        triples.append(Triple(pair[0], pred, pair[1]))

    # sometimes entities appearing only as objects, no capsule of their own
    if rng.random() < 0.5:
        pred = new_pred()
        t = rng.choice(types)
        for e in entities[t]:
            if rng.random() < 0.5:
                triples.append(
                    Triple(e, pred, Term.iri(f"{EX}/opaque/thing-{rng.randint(0, 9)}"))
                )

    return triples[:max_triples] if len(triples) > max_triples else triples


# ---------------------------------------------------------------------------
# brute-force reconstruction oracle (independent of the induction code path)

def _numeric_prefix(text: str):
    import re

    m = re.match(r"^[+-]?\d+(\.\d+)?", text)
    if m is None:
        return None
    return float(m.group(0))


def reconstruct_facts(db_path: str, report: dict) -> set:
    """Read every fact back out of the populated database using only the
    schema report JSON. Facts are (subject slug, predicate IRI, object repr)
    tuples; type facts use the rdf:type IRI and the source type IRI."""
    conn = sqlite3.connect(db_path)
    facts = set()
    for table in report["tables"]:
        columns = [c["name"] for c in table["columns"]]
        rows = conn.execute(f"SELECT {', '.join(columns)} FROM {table['name']}").fetchall()
        if table["kind"] == "entity":
            pk_index = next(
                i for i, c in enumerate(table["columns"]) if c["role"] == "primary_key"
            )
            for row in rows:
                subject = row[pk_index]
                facts.add((subject, RDF_TYPE_IRI, table["sourceTypeIri"]))
                for i, col in enumerate(table["columns"]):
                    if i == pk_index or row[i] is None:
                        continue
                    pred = col["sourcePredicateIri"]
                    if col["role"] == "fk_on_subject":
                        facts.add((subject, pred, row[i]))
                    elif col["role"] == "fk_on_object":
                        facts.add((row[i], pred, subject))
                    else:
                        facts.add((subject, pred, row[i]))
        elif table["kind"] == "multivalue":
            fk_col, val_col = table["columns"]
            pred = val_col["sourcePredicateIri"]
            for row in rows:
                facts.add((row[0], pred, row[1]))
        else:  # join
            pred = table["sourcePredicateIri"]
            for row in rows:
                facts.add((row[0], pred, row[1]))
    conn.close()
    return facts


def expected_facts(triples: list[Triple], typed_subjects: set[str]) -> set:
    """What the database must contain, derived straight from the triples."""
    expected = set()
    for triple in triples:
        s = slug(triple.subject.lexical)
        p = triple.predicate.lexical
        obj = triple.object
        if p == RDF_TYPE_IRI:
            expected.add((s, p, obj.lexical))
        elif obj.kind is TermKind.IRI and obj.lexical in typed_subjects:
            expected.add((s, p, slug(obj.lexical)))
        else:
            expected.add((s, p, obj.lexical))
    return expected


def facts_match(expected: set, reconstructed: set) -> list:
    """Return the expected facts that cannot be found in the reconstruction,
    comparing literal values modulo recorded unit suffixes (numeric prefix)."""
    by_key = {}
    for s, p, o in reconstructed:
        by_key.setdefault((s, p), []).append(o)
    missing = []
    for s, p, o in expected:
        candidates = by_key.get((s, p), [])
        if any(str(c) == str(o) for c in candidates):
            continue
        target = _numeric_prefix(str(o)) if isinstance(o, str) else float(o)
        if target is not None and any(
            isinstance(c, (int, float)) and float(c) == target for c in candidates
        ):
            continue
        missing.append((s, p, o))
    return missing
