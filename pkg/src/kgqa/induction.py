"""Relational schema induction from entity capsules.

One entity table per type value, one column per literal-valued predicate,
foreign keys placed by observed cardinality (functional → FK on the subject
table, inverse-functional → FK on the object table, otherwise a join table),
column types inferred from lexical forms, rename/comment overrides applied
last. The populated SQLite database is lossless: every input fact is
recoverable from a cell, an FK, or a join/multivalue row.
"""

from __future__ import annotations

import json
import re
import sqlite3
from dataclasses import dataclass, field

from .naming import RDF_TYPE_IRI, local_name, slug, snake_name
from .rdf import EntityCapsule, Term, TermKind, Triple


class InductionError(Exception):
    pass


class UntypedEntity(InductionError):
    def __init__(self, iri: str):
        self.iri = iri
        super().__init__(f"entity <{iri}> has no type triple")


class MultiTypedEntity(InductionError):
    def __init__(self, iri: str, types: list[str]):
        self.iri = iri
        self.types = types
        super().__init__(f"entity <{iri}> has {len(types)} types: {types}")


class BlankNodeSubject(InductionError):
    def __init__(self, label: str):
        super().__init__(f"blank-node subject _:{label} not supported by induction")


class RenameCollision(InductionError):
    pass


class ValueParseFailure(InductionError):
    def __init__(self, entity: str, column: str, value: str):
        self.entity, self.column, self.value = entity, column, value
        super().__init__(f"value {value!r} for {entity}.{column} does not fit the inferred type")


@dataclass
class InductionConfig:
    type_predicates: frozenset[str] = frozenset({RDF_TYPE_IRI})
    pick_first_type: bool = False  # lexicographically first instead of MultiTypedEntity

    def is_type_predicate(self, iri: str) -> bool:
        return iri in self.type_predicates or local_name(iri) == "type"


@dataclass
class CardinalityReport:
    predicate_iri: str
    subject_type: str
    object_type: str
    max_objects_per_subject: int
    max_subjects_per_object: int


COLUMN_ROLE_PK = "primary_key"
COLUMN_ROLE_LITERAL = "literal"
COLUMN_ROLE_FK_ON_SUBJECT = "fk_on_subject"
COLUMN_ROLE_FK_ON_OBJECT = "fk_on_object"


@dataclass
class ColumnDef:
    name: str
    sql_type: str  # INT | REAL | TEXT
    nullable: bool
    unit_suffix: str | None = None
    comment: str | None = None
    fk_target: str | None = None
    # provenance, used for lossless reconstruction
    source_predicate_iri: str | None = None
    role: str = COLUMN_ROLE_LITERAL


TABLE_ENTITY = "entity"
TABLE_JOIN = "join"
TABLE_MULTIVALUE = "multivalue"


@dataclass
class TableDef:
    name: str
    kind: str
    primary_key: str | None
    columns: list[ColumnDef] = field(default_factory=list)
    source_type_iri: str | None = None
    source_predicate_iri: str | None = None  # join/multivalue tables

    def column(self, name: str) -> ColumnDef:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(name)


@dataclass
class InducedSchema:
    tables: list[TableDef] = field(default_factory=list)
    renames: dict[str, str] = field(default_factory=dict)
    generated_ddl: str = ""
    cardinalities: list[CardinalityReport] = field(default_factory=list)

    def table(self, name: str) -> TableDef:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def entity_tables(self) -> list[TableDef]:
        return [t for t in self.tables if t.kind == TABLE_ENTITY]


@dataclass
class RenameConfig:
    renames: dict[str, str] = field(default_factory=dict)
    comments: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def from_file(path) -> "RenameConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return RenameConfig(
            renames=dict(data.get("renames", {})),
            comments=dict(data.get("comments", {})),
        )


_NUMBER_RE = re.compile(r"^[+-]?\d+(\.\d+)?")


def _split_numeric(value: str) -> tuple[str, str] | None:
    """Split into (number lexical, remainder) or None if no leading number."""
    m = _NUMBER_RE.match(value)
    if not m:
        return None
    remainder = value[m.end() :]
    if any(c.isdigit() for c in remainder):
        return None  # suffix must be non-numeric
    return m.group(0), remainder


def infer_column_type(values: list[str | None]) -> tuple[str, bool, str | None]:
    """Infer (sqlType, nullable, unitSuffix) from raw lexical forms.

    Entries of None mark entities lacking the predicate. Every non-null value
    must be a number followed by one identical non-numeric suffix to qualify
    as INT/REAL; anything else falls back to TEXT.
    """
    nullable = any(v is None for v in values)
    present = [v for v in values if v is not None]
    if not present:
        return "TEXT", nullable, None
    suffix: str | None = None
    is_real = False
    for value in present:
        parts = _split_numeric(value)
        if parts is None:
            return "TEXT", nullable, None
        number, remainder = parts
        if suffix is None:
            suffix = remainder
        elif remainder != suffix:
            return "TEXT", nullable, None
        if "." in number:
            is_real = True
    unit = suffix.strip() if suffix and suffix.strip() else None
    return ("REAL" if is_real else "INT"), nullable, unit


def strip_unit(value: str) -> int | float:
    parts = _split_numeric(value)
    if parts is None:
        raise ValueError(f"no numeric prefix in {value!r}")
    number = parts[0]
    return float(number) if "." in number else int(number)


class _Scan:
    """One complete pass over the capsules, shared by all induction steps."""

    def __init__(self, capsules: list[EntityCapsule], config: InductionConfig):
        self.config = config
        self.capsules = capsules
        self.type_of: dict[str, str] = {}
        self.type_order: list[str] = []  # first-appearance order of type IRIs
        self.subjects_of_type: dict[str, list[str]] = {}
        # (type, predicate) -> subject iri -> list of literal lexical forms
        self.literal_values: dict[tuple[str, str], dict[str, list[str]]] = {}
        self.literal_pred_order: dict[str, list[str]] = {}  # type -> predicate order
        # relation facts: (predicate, subject type, object type) -> [(s, o)]
        self.relations: dict[tuple[str, str, str], list[tuple[str, str]]] = {}
        self.relation_order: list[tuple[str, str, str]] = []
        self._scan()

    def _scan(self):
        cfg = self.config
        for capsule in self.capsules:
            if capsule.subject.kind is TermKind.BLANK_NODE:
                raise BlankNodeSubject(capsule.subject.lexical)
            subject = capsule.subject.lexical
            types = sorted(
                {
                    t.object.lexical
                    for t in capsule.triples
                    if cfg.is_type_predicate(t.predicate.lexical)
                    and t.object.kind is TermKind.IRI
                }
            )
            if not types:
                raise UntypedEntity(subject)
            if len(types) > 1 and not cfg.pick_first_type:
                raise MultiTypedEntity(subject, types)
            type_iri = types[0]
            self.type_of[subject] = type_iri
            if type_iri not in self.subjects_of_type:
                self.type_order.append(type_iri)
                self.subjects_of_type[type_iri] = []
            self.subjects_of_type[type_iri].append(subject)

        for capsule in self.capsules:
            subject = capsule.subject.lexical
            subj_type = self.type_of[subject]
            for triple in capsule.triples:
                pred = triple.predicate.lexical
                if self.config.is_type_predicate(pred):
                    continue
                obj = triple.object
                if obj.kind is TermKind.IRI and obj.lexical in self.type_of:
                    key = (pred, subj_type, self.type_of[obj.lexical])
                    if key not in self.relations:
                        self.relations[key] = []
                        self.relation_order.append(key)
                    self.relations[key].append((subject, obj.lexical))
                else:
                    # literal, or an IRI with no capsule of its own: opaque text
                    value = obj.lexical
                    lkey = (subj_type, pred)
                    if lkey not in self.literal_values:
                        self.literal_values[lkey] = {}
                        self.literal_pred_order.setdefault(subj_type, []).append(pred)
                    self.literal_values[lkey].setdefault(subject, []).append(value)

    def cardinality_reports(self) -> list[CardinalityReport]:
        reports = []
        for key in self.relation_order:
            pred, styp, otyp = key
            pairs = self.relations[key]
            per_subject: dict[str, set[str]] = {}
            per_object: dict[str, set[str]] = {}
            for s, o in pairs:
                per_subject.setdefault(s, set()).add(o)
                per_object.setdefault(o, set()).add(s)
            reports.append(
                CardinalityReport(
                    predicate_iri=pred,
                    subject_type=styp,
                    object_type=otyp,
                    max_objects_per_subject=max(len(v) for v in per_subject.values()),
                    max_subjects_per_object=max(len(v) for v in per_object.values()),
                )
            )
        return reports


def analyze_cardinalities(
    capsules: list[EntityCapsule], config: InductionConfig | None = None
) -> list[CardinalityReport]:
    """Exact max counts, both directions, per (predicate, subjectType, objectType)."""
    return _Scan(capsules, config or InductionConfig()).cardinality_reports()


def _uniquify(name: str, taken: set[str]) -> str:
    candidate = name
    counter = 2
    while candidate in taken:
        candidate = f"{name}_{counter}"
        counter += 1
    taken.add(candidate)
    return candidate


def induce_schema(
    capsules: list[EntityCapsule],
    overrides: RenameConfig | None = None,
    config: InductionConfig | None = None,
) -> InducedSchema:
    config = config or InductionConfig()
    overrides = overrides or RenameConfig()
    scan = _Scan(capsules, config)
    schema = InducedSchema(cardinalities=scan.cardinality_reports())

    table_name_of_type: dict[str, str] = {}
    taken_tables: set[str] = set()
    taken_columns: dict[str, set[str]] = {}
    for type_iri in scan.type_order:
        name = snake_name(type_iri)
        if name in taken_tables:
            raise RenameCollision(
                f"type <{type_iri}> collides with existing table {name!r}"
            )
        taken_tables.add(name)
        table_name_of_type[type_iri] = name
        table = TableDef(
            name=name,
            kind=TABLE_ENTITY,
            primary_key="id",
            source_type_iri=type_iri,
        )
        table.columns.append(
            ColumnDef(
                name="id",
                sql_type="TEXT",
                nullable=False,
                comment="entity identifier",
                role=COLUMN_ROLE_PK,
            )
        )
        taken_columns[name] = {"id"}
        schema.tables.append(table)

    # scalar literal columns; multi-valued predicates become auxiliary tables
    multivalue_tables: list[TableDef] = []
    for type_iri in scan.type_order:
        table = schema.table(table_name_of_type[type_iri])
        subjects = scan.subjects_of_type[type_iri]
        for pred in scan.literal_pred_order.get(type_iri, []):
            per_subject = scan.literal_values[(type_iri, pred)]
            multivalued = any(len(vals) > 1 for vals in per_subject.values())
            base = snake_name(pred)
            if multivalued:
                all_values = [v for vals in per_subject.values() for v in vals]
                sql_type, _, unit = infer_column_type(all_values)
                aux_name = _uniquify(f"{table.name}_{base}", taken_tables)
                aux = TableDef(
                    name=aux_name,
                    kind=TABLE_MULTIVALUE,
                    primary_key=None,
                    source_predicate_iri=pred,
                )
                aux.columns.append(
                    ColumnDef(
                        name=f"{table.name}_id",
                        sql_type="TEXT",
                        nullable=False,
                        fk_target=table.name,
                        role=COLUMN_ROLE_FK_ON_SUBJECT,
                    )
                )
                aux.columns.append(
                    ColumnDef(
                        name=base,
                        sql_type=sql_type,
                        nullable=False,
                        unit_suffix=unit,
                        comment=f"values in {unit}" if unit else None,
                        source_predicate_iri=pred,
                    )
                )
                multivalue_tables.append(aux)
                continue
            values = [
                per_subject[s][0] if s in per_subject else None for s in subjects
            ]
            sql_type, nullable, unit = infer_column_type(values)
            table.columns.append(
                ColumnDef(
                    name=_uniquify(base, taken_columns[table.name]),
                    sql_type=sql_type,
                    nullable=nullable,
                    unit_suffix=unit,
                    comment=f"values in {unit}" if unit else None,
                    source_predicate_iri=pred,
                )
            )

    # FK placement per cardinality trichotomy
    join_tables: list[TableDef] = []
    for report in schema.cardinalities:
        subj_table = schema.table(table_name_of_type[report.subject_type])
        obj_table = schema.table(table_name_of_type[report.object_type])
        pairs = scan.relations[
            (report.predicate_iri, report.subject_type, report.object_type)
        ]
        base = snake_name(report.predicate_iri)
        if report.max_objects_per_subject == 1:
            covered = {s for s, _ in pairs}
            nullable = any(
                s not in covered for s in scan.subjects_of_type[report.subject_type]
            )
            subj_table.columns.append(
                ColumnDef(
                    name=_uniquify(base, taken_columns[subj_table.name]),
                    sql_type="TEXT",
                    nullable=nullable,
                    fk_target=obj_table.name,
                    source_predicate_iri=report.predicate_iri,
                    role=COLUMN_ROLE_FK_ON_SUBJECT,
                )
            )
        elif report.max_subjects_per_object == 1:
            covered = {o for _, o in pairs}
            nullable = any(
                o not in covered for o in scan.subjects_of_type[report.object_type]
            )
            obj_table.columns.append(
                ColumnDef(
                    name=_uniquify(f"{base}_of", taken_columns[obj_table.name]),
                    sql_type="TEXT",
                    nullable=nullable,
                    fk_target=subj_table.name,
                    source_predicate_iri=report.predicate_iri,
                    role=COLUMN_ROLE_FK_ON_OBJECT,
                )
            )
        else:
            name = _uniquify(
                f"{subj_table.name}_{base}_{obj_table.name}", taken_tables
            )
            join = TableDef(
                name=name,
                kind=TABLE_JOIN,
                primary_key=None,
                source_predicate_iri=report.predicate_iri,
            )
            taken = set()
            join.columns.append(
                ColumnDef(
                    name=_uniquify(f"{subj_table.name}_id", taken),
                    sql_type="TEXT",
                    nullable=False,
                    fk_target=subj_table.name,
                    role=COLUMN_ROLE_FK_ON_SUBJECT,
                )
            )
            join.columns.append(
                ColumnDef(
                    name=_uniquify(f"{obj_table.name}_id", taken),
                    sql_type="TEXT",
                    nullable=False,
                    fk_target=obj_table.name,
                    role=COLUMN_ROLE_FK_ON_OBJECT,
                )
            )
            join_tables.append(join)

    schema.tables.extend(multivalue_tables)
    schema.tables.extend(join_tables)
    _apply_overrides(schema, overrides)
    schema.generated_ddl = emit_ddl(schema)
    return schema


def _apply_overrides(schema: InducedSchema, overrides: RenameConfig):
    def display(name: str) -> str:
        return name.strip().replace(" ", "_")

    for original, new in overrides.renames.items():
        new_name = display(new)
        if "." in original:
            table_name, column_name = original.split(".", 1)
            table = schema.table(table_name)
            column = table.column(column_name)
            if any(c.name == new_name for c in table.columns if c is not column):
                raise RenameCollision(f"column rename {original!r} -> {new!r}")
            column.name = new_name
            if table.primary_key == column_name:
                table.primary_key = new_name
        else:
            if any(t.name == new_name for t in schema.tables if t.name != original):
                raise RenameCollision(f"table rename {original!r} -> {new!r}")
            table = schema.table(original)
            old = table.name
            table.name = new_name
            for t in schema.tables:
                for col in t.columns:
                    if col.fk_target == old:
                        col.fk_target = new_name
        schema.renames[original] = new_name

    for target, text in overrides.comments.items():
        table_name, column_name = target.split(".", 1)
        schema.table(table_name).column(column_name).comment = text


def emit_ddl(schema: InducedSchema) -> str:
    """Deterministic CREATE TABLE text, loadable by SQLite."""
    statements = []
    for table in schema.tables:
        lines = [f"CREATE TABLE {table.name} ("]
        for index, col in enumerate(table.columns):
            parts = [f"    {col.name} {col.sql_type}"]
            if table.primary_key == col.name:
                parts.append("PRIMARY KEY")
            elif not col.nullable:
                parts.append("NOT NULL")
            if col.fk_target:
                target_pk = schema.table(col.fk_target).primary_key or "id"
                parts.append(f"REFERENCES {col.fk_target}({target_pk})")
            line = " ".join(parts)
            if index < len(table.columns) - 1:
                line += ","
            if col.comment:
                line += f"  -- {col.comment}"
            lines.append(line)
        lines.append(");")
        statements.append("\n".join(lines))
    return "\n\n".join(statements) + "\n"


@dataclass
class PopulatedDatabase:
    path: str  # filesystem path or ":memory:"
    connection: sqlite3.Connection
    schema: InducedSchema

    def close(self):
        self.connection.close()


def insert_rows(
    capsules: list[EntityCapsule],
    schema: InducedSchema,
    db_path: str = ":memory:",
    config: InductionConfig | None = None,
) -> PopulatedDatabase:
    """Populate a SQLite database from the capsules the schema was induced from."""
    config = config or InductionConfig()
    scan = _Scan(capsules, config)
    conn = sqlite3.connect(db_path)
    conn.executescript(schema.generated_ddl)

    table_of_type = {
        t.source_type_iri: t for t in schema.tables if t.kind == TABLE_ENTITY
    }

    def cell_value(col: ColumnDef, raw: str, entity: str):
        if col.sql_type in ("INT", "REAL") and col.unit_suffix is not None:
            try:
                return strip_unit(raw)
            except ValueError:
                raise ValueParseFailure(entity, col.name, raw)
        if col.sql_type == "INT":
            try:
                return int(raw)
            except ValueError:
                raise ValueParseFailure(entity, col.name, raw)
        if col.sql_type == "REAL":
            try:
                return float(raw)
            except ValueError:
                raise ValueParseFailure(entity, col.name, raw)
        return raw

    # entity rows
    for type_iri, table in table_of_type.items():
        for subject in scan.subjects_of_type.get(type_iri, []):
            row = []
            for col in table.columns:
                if col.role == COLUMN_ROLE_PK:
                    row.append(slug(subject))
                elif col.role == COLUMN_ROLE_FK_ON_SUBJECT:
                    pairs = scan.relations.get(
                        (col.source_predicate_iri, type_iri, _target_type(schema, col))
                    , [])
                    match = [o for s, o in pairs if s == subject]
                    row.append(slug(match[0]) if match else None)
                elif col.role == COLUMN_ROLE_FK_ON_OBJECT:
                    pairs = scan.relations.get(
                        (col.source_predicate_iri, _target_type(schema, col), type_iri)
                    , [])
                    match = [s for s, o in pairs if o == subject]
                    row.append(slug(match[0]) if match else None)
                else:
                    per_subject = scan.literal_values.get(
                        (type_iri, col.source_predicate_iri), {}
                    )
                    values = per_subject.get(subject)
                    row.append(
                        cell_value(col, values[0], subject) if values else None
                    )
            placeholders = ", ".join("?" for _ in row)
            conn.execute(f"INSERT INTO {table.name} VALUES ({placeholders})", row)

    # multivalue rows
    for table in schema.tables:
        if table.kind != TABLE_MULTIVALUE:
            continue
        fk_col, val_col = table.columns
        parent = schema.table(fk_col.fk_target)
        per_subject = scan.literal_values[
            (parent.source_type_iri, table.source_predicate_iri)
        ]
        for subject in scan.subjects_of_type[parent.source_type_iri]:
            for raw in per_subject.get(subject, []):
                conn.execute(
                    f"INSERT INTO {table.name} VALUES (?, ?)",
                    (slug(subject), cell_value(val_col, raw, subject)),
                )

    # join rows
    for table in schema.tables:
        if table.kind != TABLE_JOIN:
            continue
        subj_col, obj_col = table.columns
        subj_type = schema.table(subj_col.fk_target).source_type_iri
        obj_type = schema.table(obj_col.fk_target).source_type_iri
        pairs = scan.relations[(table.source_predicate_iri, subj_type, obj_type)]
        for s, o in pairs:
            conn.execute(
                f"INSERT INTO {table.name} VALUES (?, ?)", (slug(s), slug(o))
            )

    conn.commit()
    return PopulatedDatabase(path=db_path, connection=conn, schema=schema)


def _target_type(schema: InducedSchema, col: ColumnDef) -> str:
    return schema.table(col.fk_target).source_type_iri


def schema_report(schema: InducedSchema) -> dict:
    """JSON-serializable report: tables, columns, inferred types, cardinalities."""
    return {
        "tables": [
            {
                "name": t.name,
                "kind": t.kind,
                "primaryKey": t.primary_key,
                "sourceTypeIri": t.source_type_iri,
                "sourcePredicateIri": t.source_predicate_iri,
                "columns": [
                    {
                        "name": c.name,
                        "sqlType": c.sql_type,
                        "nullable": c.nullable,
                        "unitSuffix": c.unit_suffix,
                        "comment": c.comment,
                        "fkTarget": c.fk_target,
                        "sourcePredicateIri": c.source_predicate_iri,
                        "role": c.role,
                    }
                    for c in t.columns
                ],
            }
            for t in schema.tables
        ],
        "cardinalities": [
            {
                "predicateIri": r.predicate_iri,
                "subjectType": r.subject_type,
                "objectType": r.object_type,
                "maxObjectsPerSubject": r.max_objects_per_subject,
                "maxSubjectsPerObject": r.max_subjects_per_object,
            }
            for r in schema.cardinalities
        ],
        "renames": schema.renames,
    }
