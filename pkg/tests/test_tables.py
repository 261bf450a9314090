import pytest

from panelbc.errors import UnknownTable
from panelbc.simlab import TABLES, format_table, replicate_table, table_spec


def test_registry_ids():
    assert sorted(TABLES) == [2, 3, 4, 5, 6, 7, 8, 9, 12]
    assert table_spec("4").table_id == 4


@pytest.mark.parametrize("bad", [1, 10, "x", None])
def test_unknown_table(bad):
    with pytest.raises(UnknownTable):
        table_spec(bad)


def test_design_labels():
    spec = table_spec(6)
    assert spec.design_label(spec.designs[0]) == "mean N = 200; mean T = 15"
    assert table_spec(4).design_label(table_spec(4).designs[0]) == "N = 200; T = 10"


def test_wald_groups_cover_designs():
    spec = table_spec(9)
    assert sum(c for _, c in spec.groups) == len(spec.designs)


@pytest.mark.parametrize("tid,needle", [(12, "BC (2)"), (4, "LPM (1)")])
def test_format_tiny_replication(tid, needle):
    res = replicate_table(tid, reps=2, base_seed=3)
    text = format_table(res)
    assert text.startswith(f"Table {tid}:")
    assert needle in text
    assert "2 replications" in text
    assert len(res.summaries) == len(res.spec.designs)
    assert res.to_dict()["blocks"][0]["reps"] == 2


def test_table_is_reproducible():
    a = format_table(replicate_table(12, reps=2, base_seed=8))
    b = format_table(replicate_table(12, reps=2, base_seed=8))
    assert a == b
