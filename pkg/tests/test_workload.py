import logging

import networkx as nx
import numpy as np
import pytest

from pcnsim.workload import (BalanceSpec, EdgeList, SnapshotParseError, TopologySpec, TransactionSpec,
                             Transactions, generate_ba, generate_transactions, giant_component,
                             init_balances, load_snapshot)


def test_ba_edge_count_and_hubs():
    g = generate_ba(5000, 5, seed=1)
    assert g.n_nodes == 5000
    assert len(g.edges) == (5000 - 5) * 5 == 24975
    deg = np.bincount(np.array(g.edges).ravel(), minlength=5000)
    assert deg.max() > 5 * deg.mean()
    assert g.average_degree == pytest.approx(2 * 24975 / 5000)


def test_ba_is_connected_and_simple():
    g = generate_ba(300, 3, seed=2)
    graph = nx.Graph(g.edges)
    assert nx.is_connected(graph)
    assert graph.number_of_edges() == len(g.edges)
    assert all(u != v for u, v in g.edges)


def test_ba_deterministic():
    assert generate_ba(500, 5, 7).edges == generate_ba(500, 5, 7).edges
    assert generate_ba(500, 5, 7).edges != generate_ba(500, 5, 8).edges


def test_ba_rejects_bad_parameters():
    with pytest.raises(ValueError):
        generate_ba(5, 5, 0)


def test_topology_spec_validation():
    with pytest.raises(ValueError):
        TopologySpec(kind="snapshot_file")
    with pytest.raises(ValueError):
        TopologySpec(kind="ring")


def test_snapshot_triangle(tmp_path):
    p = tmp_path / "tri.txt"
    p.write_text("# a triangle\n0 1\n1 2\n\n2 0  # closing edge\n")
    g = load_snapshot(p)
    assert g.n_nodes == 3
    assert g.edges == [(0, 1), (1, 2), (0, 2)]
    assert g.dropped == 0 and g.capacities is None


def test_snapshot_duplicate_dropped_with_warning(tmp_path, caplog):
    p = tmp_path / "dup.txt"
    p.write_text("0 1\n1 0\n1 2\n")
    with caplog.at_level(logging.WARNING):
        g = load_snapshot(p)
    assert g.edges == [(0, 1), (1, 2)]
    assert g.dropped == 1
    assert "dropped 1" in caplog.text


def test_snapshot_capacities(tmp_path):
    p = tmp_path / "cap.txt"
    p.write_text("0 1 500\n1 2 1e3\n")
    g = load_snapshot(p)
    assert g.capacities == [500.0, 1000.0]
    net = init_balances(g, BalanceSpec(), 0)
    assert net.balance(0, 1) + net.balance(1, 0) == pytest.approx(500)
    assert net.balance(1, 2) + net.balance(2, 1) == pytest.approx(1000)


@pytest.mark.parametrize("text, lineno", [
    ("0 1\n1 x\n", 2),
    ("0 1\n2\n", 2),
    ("0 1 5\n1 2\n", 2),
    ("0 1\n\n-1 3\n", 3),
    ("0 1 0\n", 1),
])
def test_snapshot_parse_errors_name_the_line(tmp_path, text, lineno):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(SnapshotParseError, match=f":{lineno}:"):
        load_snapshot(p)


def test_giant_component_relabels(caplog):
    g = EdgeList(6, [(0, 1), (1, 2), (4, 5)])
    with caplog.at_level(logging.WARNING):
        giant, excluded = giant_component(g)
    assert excluded == [3, 4, 5]
    assert giant.n_nodes == 3 and giant.edges == [(0, 1), (1, 2)]
    assert "excluded 3" in caplog.text
    same, none = giant_component(giant)
    assert same is giant and none == []


def test_exponential_balance_mean():
    g = generate_ba(5000, 5, 0)
    net = init_balances(g, BalanceSpec(mean=2.4e6), 0)
    caps = net.cap
    assert caps.mean() == pytest.approx(2.4e6, rel=0.01)
    sides = np.concatenate([net.fwd, net.cap - net.fwd])
    assert sides.mean() == pytest.approx(1.2e6, rel=0.01)
    assert (net.ref == net.cap / 2).all()


def test_normal_balances_positive():
    g = generate_ba(2000, 5, 0)
    net = init_balances(g, BalanceSpec("normal", mean=2.4e6, normal_sd_ratio=2.0), 0)
    assert (net.fwd > 0).all() and (net.cap - net.fwd > 0).all()


def test_balance_spec_validation():
    with pytest.raises(ValueError):
        BalanceSpec("uniform")
    with pytest.raises(ValueError):
        BalanceSpec(mean=0)


def test_transactions_basic():
    spec = TransactionSpec(count=100_000, scale_factor=0.05)
    txs = generate_transactions(1000, spec, 2.4e6, seed=3)
    assert len(txs) == 100_000
    assert (txs.sources != txs.dests).all()
    assert txs.values.mean() == pytest.approx(0.05 * 2.4e6, rel=0.02)
    assert (txs.values > 0).all()
    counts = np.bincount(txs.sources, minlength=1000)
    assert counts.min() > 0


def test_transactions_over_node_subset():
    txs = generate_transactions([3, 9, 12], TransactionSpec(count=500), 100.0, seed=0)
    assert set(txs.sources) | set(txs.dests) <= {3, 9, 12}
    assert (txs.sources != txs.dests).all()


def test_normal_values_floored():
    spec = TransactionSpec(count=20_000, value_distribution="normal", normal_sd_ratio=3.0)
    txs = generate_transactions(50, spec, 100.0, seed=1)
    assert txs.values.min() >= spec.min_value


def test_transactions_deterministic_and_record_roundtrip():
    spec = TransactionSpec(count=50)
    a = generate_transactions(20, spec, 10.0, 4)
    b = generate_transactions(20, spec, 10.0, 4)
    assert list(a) == list(b)
    again = Transactions.from_records(list(a))
    assert list(again) == list(a)
    assert a[3] == list(a)[3]


def test_transactions_need_two_nodes():
    with pytest.raises(ValueError):
        generate_transactions(1, TransactionSpec(count=5), 1.0, 0)
