"""Deterministic synthetic knowledge graphs for demos and tests.

The real automobile data behind the original system is proprietary, so
fixtures of the same shape are generated instead: a configurable number of
subjects, predicates and types, with unit-suffixed numeric literals,
functional and many-to-many relations.
"""

from __future__ import annotations

from .naming import RDF_TYPE_IRI
from .rdf import Term, Triple

BASE = "http://example.org"

_TYPE_PLAN = [
    ("car", 200),
    ("engine", 100),
    ("equipment", 60),
    ("series", 40),
    ("dealer", 30),
    ("fuel_type", 20),
    ("body_style", 16),
]


def _iri(kind: str, i: int) -> Term:
    return Term.iri(f"{BASE}/{kind}/{kind}-{i}")


def _pred(name: str) -> Term:
    return Term.iri(f"{BASE}/p/{name}")


def generate_fixture_kg(
    n_subjects: int = 466, n_triples: int = 3442, n_predicates: int = 27, n_types: int = 7
) -> list[Triple]:
    """A KG with exactly the requested counts (defaults: 3442 triples,
    466 subjects, 27 distinct predicates, 7 types)."""
    plan = _TYPE_PLAN[:n_types]
    total_planned = sum(c for _, c in plan)
    # adjust the first type's population to hit the subject count exactly
    plan[0] = (plan[0][0], plan[0][1] + n_subjects - total_planned)
    entities = {kind: [_iri(kind, i) for i in range(count)] for kind, count in plan}

    triples: list[Triple] = []
    type_pred = Term.iri(RDF_TYPE_IRI)
    for kind, _ in plan:
        type_term = Term.iri(f"{BASE}/type/{kind}")
        for entity in entities[kind]:
            triples.append(Triple(entity, type_pred, type_term))

    # candidate non-type facts, grouped per predicate, deterministic order
    pool: dict[str, list[Triple]] = {}

    def literal_facts(kind: str, pred: str, value_fn):
        pool[pred] = [
            Triple(e, _pred(pred), Term.literal(value_fn(i)))
            for i, e in enumerate(entities[kind])
        ]

    cars = entities.get("car", [])
    literal_facts("car", "price", lambda i: f"{30000 + 137 * i} EUR")
    literal_facts("car", "height", lambda i: f"{1400 + i % 300} mm")
    literal_facts("car", "width", lambda i: f"{1800 + i % 200} mm")
    literal_facts("car", "wheelbase", lambda i: f"{2600 + i % 400} mm")
    literal_facts("car", "acceleration", lambda i: f"{5 + (i % 40) / 10:.1f} s")
    literal_facts("car", "drive_type", lambda i: ["rear wheel", "front wheel", "all wheel"][i % 3])
    literal_facts("car", "model_name", lambda i: f"model {i}")
    literal_facts("engine", "engine_performance", lambda i: f"{90 + 5 * i} kW")
    literal_facts("engine", "displacement", lambda i: f"{1.5 + (i % 20) / 10:.1f} l")
    literal_facts("engine", "cylinders", lambda i: str(3 + i % 6))
    literal_facts("equipment", "description", lambda i: f"equipment feature {i}")
    literal_facts("equipment", "surcharge", lambda i: f"{500 + 25 * i} EUR")
    literal_facts("series", "launch_year", lambda i: str(1990 + i % 35))
    literal_facts("series", "segment", lambda i: ["compact", "executive", "luxury"][i % 3])
    literal_facts("dealer", "city", lambda i: f"city {i}")
    literal_facts("dealer", "rating", lambda i: f"{3 + (i % 20) / 10:.1f}")
    literal_facts("fuel_type", "label", lambda i: f"fuel {i}")
    literal_facts("fuel_type", "co2_factor", lambda i: f"{(i % 30) / 10:.1f} kg")
    literal_facts("body_style", "doors", lambda i: str(2 + i % 4))
    literal_facts("body_style", "style_name", lambda i: f"style {i}")

    engines = entities.get("engine", [])
    series = entities.get("series", [])
    equipment = entities.get("equipment", [])
    fuel = entities.get("fuel_type", [])
    dealers = entities.get("dealer", [])
    pool["engine_specification"] = [
        Triple(c, _pred("engine_specification"), engines[i % len(engines)])
        for i, c in enumerate(cars)
    ]
    pool["belongs_to_series"] = [
        Triple(c, _pred("belongs_to_series"), series[i % len(series)])
        for i, c in enumerate(cars)
    ]
    pool["has_equipment"] = [
        Triple(c, _pred("has_equipment"), equipment[(i + offset) % len(equipment)])
        for i, c in enumerate(cars)
        for offset in (0, 7)
    ]
    pool["fuel_type"] = [
        Triple(e, _pred("fuel_type"), fuel[i % len(fuel)])
        for i, e in enumerate(engines)
    ]
    pool["sold_by"] = [
        Triple(c, _pred("sold_by"), dealers[(i + offset) % len(dealers)])
        for i, c in enumerate(cars)
        for offset in (0, 3)
    ]
    pool["body_style"] = [
        Triple(c, _pred("body_style"), entities["body_style"][i % len(entities["body_style"])])
        for i, c in enumerate(cars)
    ]

    pred_names = sorted(pool)
    assert len(pred_names) + 1 == n_predicates, (len(pred_names) + 1, n_predicates)

    needed = n_triples - len(triples)
    capacity = sum(len(v) for v in pool.values())
    if needed > capacity:
        raise ValueError(f"cannot reach {n_triples} triples; capacity {capacity + len(triples)}")

    # one fact per predicate first so all predicates occur, then round-robin
    cursors = {p: 0 for p in pred_names}
    selected: list[Triple] = []
    for p in pred_names:
        selected.append(pool[p][0])
        cursors[p] = 1
    while len(selected) < needed:
        progressed = False
        for p in pred_names:
            if len(selected) >= needed:
                break
            if cursors[p] < len(pool[p]):
                selected.append(pool[p][cursors[p]])
                cursors[p] += 1
                progressed = True
        if not progressed:
            break
    triples.extend(selected[:needed])
    assert len(triples) == n_triples
    return triples
