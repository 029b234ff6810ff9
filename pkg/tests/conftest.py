import pytest

from kgqa.induction import induce_schema, insert_rows
from kgqa.rdf import group_capsules, parse_ntriples
from kgqa.retrieval import build_index
from kgqa.verbalize import verbalize_capsules

from helpers import TINY_KG


@pytest.fixture(scope="session")
def tiny_setup(tmp_path_factory):
    """(db_path, index, ddl) built from the tiny car KG."""
    path = str(tmp_path_factory.mktemp("tiny") / "kg.db")
    capsules = group_capsules(parse_ntriples(TINY_KG))
    schema = induce_schema(capsules)
    insert_rows(capsules, schema, path).close()
    index = build_index(verbalize_capsules(capsules))
    return path, index, schema.generated_ddl
