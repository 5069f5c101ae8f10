import networkx as nx
import pytest

from sixpp.core import (BROADCAST, COORDINATOR, Frame, FrameKind, Rng, Topology,
                        TopologyError, hop_distance, make_grid_topology,
                        make_line_topology, make_random_geometric_topology,
                        parse_edge_list)


def as_digraph(topo: Topology) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(topo.nodes())
    g.add_edges_from(k for k in topo.links if topo.has_edge(*k))
    return g


def test_line_distances_match_networkx():
    topo = make_line_topology(10, 1.0)
    lengths = nx.single_source_shortest_path_length(as_digraph(topo), 0)
    assert topo.bfs_distances(0) == [lengths[i] for i in range(10)]
    assert topo.eccentricity(0) == 9


def test_grid_eccentricity_and_corner_coordinator():
    topo = make_grid_topology(6, 8, 0.9)
    assert topo.node_count == 48
    assert topo.eccentricity(COORDINATOR) == 5 + 7
    assert sorted(topo.out_neighbors(0)) == [1, 8]


@pytest.mark.parametrize("seed", range(5))
def test_rgg_connected_and_symmetric(seed):
    topo = make_random_geometric_topology(30, 0.3, 0.8, seed)
    assert topo.is_connected()
    assert topo.is_symmetric()
    assert nx.is_strongly_connected(as_digraph(topo))


def test_rgg_is_reproducible():
    a = make_random_geometric_topology(20, 0.4, 1.0, 7)
    b = make_random_geometric_topology(20, 0.4, 1.0, 7)
    assert a.links == b.links


def test_hop_distance_unreachable_is_none():
    topo = Topology(3)
    topo.add_link(0, 1, 1.0)
    assert hop_distance(topo, 0, 1) == 1
    assert hop_distance(topo, 0, 2) is None
    assert topo.eccentricity(0) is None


def test_asymmetric_link_is_directed():
    topo = Topology(2)
    topo.add_link(0, 1, 0.5)
    assert topo.prr(0, 1) == 0.5 and topo.prr(1, 0) == 0.0
    assert not topo.is_symmetric()


def test_per_channel_prr():
    topo = Topology(2)
    topo.add_link(0, 1, {15: 0.0, None: 0.9})
    assert topo.prr(0, 1, 15) == 0.0
    assert topo.prr(0, 1, 11) == 0.9
    assert topo.has_edge(0, 1)


@pytest.mark.parametrize("bad", [-0.1, 1.5])
def test_prr_range_checked(bad):
    with pytest.raises(TopologyError):
        Topology(2).add_link(0, 1, bad)


def test_self_link_and_unknown_node_rejected():
    topo = Topology(2)
    with pytest.raises(TopologyError):
        topo.add_link(1, 1, 1.0)
    with pytest.raises(TopologyError):
        topo.add_link(0, 5, 1.0)


def test_edge_list_round_trip():
    topo = make_grid_topology(2, 3, 0.75)
    again = parse_edge_list(topo.to_edge_list(), topo.node_count)
    assert again.links == topo.links
    assert again.symmetric


def test_edge_list_errors_name_the_line():
    with pytest.raises(TopologyError, match="line 3"):
        parse_edge_list("# comment\n0 1 1.0\n0 2\n")
    with pytest.raises(TopologyError, match="line 1"):
        parse_edge_list("0 x 1.0\n")


def test_frame_payload_positive():
    with pytest.raises(ValueError):
        Frame(FrameKind.DATA, 0, BROADCAST, 1, 0, 0)


def test_rng_streams_are_independent_and_reproducible():
    a, b = Rng(5), Rng(5)
    xs = [a.stream(1, "csma").random() for _ in range(3)]
    # Drawing from another purpose must not shift this stream.
    b.stream(1, "ct").random()
    assert [b.stream(1, "csma").random() for _ in range(3)] == xs
    assert Rng(6).stream(1, "csma").random() != xs[0]


def test_hash_draw_stateless_and_in_range():
    rng = Rng(3)
    draws = [rng.hash_draw(4, "scan", k, 16) for k in range(200)]
    assert draws == [Rng(3).hash_draw(4, "scan", k, 16) for k in range(200)]
    assert set(draws) <= set(range(16))
    assert len(set(draws)) > 8
