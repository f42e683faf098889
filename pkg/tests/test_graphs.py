import numpy as np
import pytest

from pollnet import graphs
from pollnet.graphs import (
    AttributeLaw,
    EligibilityRule,
    GraphFormatError,
    SocialGraph,
    apply_eligibility,
    attach_attributes,
    generate_synthetic_graph,
    largest_connected_component,
    load_canonical,
    load_edge_list,
    rule_for_fraction,
    save_canonical,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadEdgeList:
    def test_basic_construction(self, tmp_path):
        path = write(tmp_path, "e.txt", "a b\nb c\n")
        g = load_edge_list(path)
        assert g.n_nodes == 3
        assert g.n_edges == 2
        b = g.id_map.index("b")
        nbrs = {g.id_map[v] for v in g.neighbors(b)}
        assert nbrs == {"a", "c"}

    def test_duplicate_and_self_loop_dropped(self, tmp_path):
        path = write(tmp_path, "e.txt", "a b\nb a\na a\n")
        g = load_edge_list(path)
        assert g.n_nodes == 2
        assert g.n_edges == 1

    def test_malformed_line_reports_number(self, tmp_path):
        path = write(tmp_path, "e.txt", "a b\nc\n")
        with pytest.raises(GraphFormatError, match="line 2"):
            load_edge_list(path)

    def test_empty_file_rejected(self, tmp_path):
        path = write(tmp_path, "e.txt", "")
        with pytest.raises(GraphFormatError, match="no edges"):
            load_edge_list(path)

    def test_csv_and_tsv_formats(self, tmp_path):
        for fmt, sep in [("csv", ","), ("tsv", "\t")]:
            path = write(tmp_path, f"e.{fmt}", f"a{sep}b\nb{sep}c\n")
            g = load_edge_list(path, fmt=fmt)
            assert g.n_edges == 2

    def test_numeric_tokens_sort_numerically(self, tmp_path):
        path = write(tmp_path, "e.txt", "10 2\n2 1\n")
        g = load_edge_list(path)
        assert g.id_map == ["1", "2", "10"]

    def test_comment_lines_skipped(self, tmp_path):
        path = write(tmp_path, "e.txt", "# header\na b\n")
        assert load_edge_list(path).n_edges == 1

    def test_invariants_hold_after_load(self, tmp_path):
        rng = np.random.default_rng(0)
        lines = [f"{rng.integers(0, 30)} {rng.integers(0, 30)}" for _ in range(200)]
        path = write(tmp_path, "e.txt", "\n".join(lines) + "\n")
        try:
            g = load_edge_list(path)
        except GraphFormatError:
            return
        g.validate()


class TestAttachAttributes:
    def make_graph(self, tmp_path):
        path = write(tmp_path, "e.txt", "a b\nb c\nc d\nd e\n")
        return load_edge_list(path)

    def test_missing_value_drops_node(self, tmp_path):
        g = self.make_graph(tmp_path)
        attrs = write(tmp_path, "a.csv", "id,age\na,30\nb,40\nc,50\nd,60\n")
        g2, dropped = attach_attributes(g, attrs, "age")
        assert dropped == 1
        assert g2.n_nodes == 4
        assert "e" not in g2.id_map
        g2.validate()

    def test_no_drops_when_fully_attributed(self, tmp_path):
        g = self.make_graph(tmp_path)
        attrs = write(tmp_path, "a.csv", "id,age\na,1\nb,2\nc,3\nd,4\ne,5\n")
        g2, dropped = attach_attributes(g, attrs, "age")
        assert dropped == 0
        assert g2.n_nodes == g.n_nodes
        assert np.allclose(sorted(g2.attribute), [1, 2, 3, 4, 5])

    def test_non_numeric_value_names_row(self, tmp_path):
        g = self.make_graph(tmp_path)
        attrs = write(tmp_path, "a.csv", "id,age\na,30\nb,abc\n")
        with pytest.raises(GraphFormatError, match="row 3"):
            attach_attributes(g, attrs, "age")

    def test_majority_missing_aborts(self, tmp_path):
        g = self.make_graph(tmp_path)
        attrs = write(tmp_path, "a.csv", "id,age\na,30\n")
        with pytest.raises(ValueError, match="refusing"):
            attach_attributes(g, attrs, "age")

    def test_headerless_two_column(self, tmp_path):
        g = self.make_graph(tmp_path)
        attrs = write(tmp_path, "a.csv", "a,1\nb,2\nc,3\nd,4\ne,5\n")
        g2, dropped = attach_attributes(g, attrs, "age")
        assert dropped == 0


class TestLargestComponent:
    def test_picks_bigger_component(self):
        # triangle plus a 4-cycle
        g = SocialGraph.from_edges(
            [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (5, 6), (6, 3)], n_nodes=7
        )
        lcc, hist = largest_connected_component(g)
        assert lcc.n_nodes == 4
        assert hist == {3: 1, 4: 1}

    def test_connected_graph_is_identity(self):
        g = SocialGraph.from_edges([(0, 1), (1, 2)], n_nodes=3)
        lcc, hist = largest_connected_component(g)
        assert lcc is g
        assert hist == {3: 1}

    def test_empty_graph_rejected(self):
        g = SocialGraph.from_edges([], n_nodes=0)
        with pytest.raises(ValueError):
            largest_connected_component(g)

    def test_attribute_follows_nodes(self):
        g = SocialGraph.from_edges([(0, 1), (2, 3), (3, 4)], n_nodes=5)
        g.attribute = np.array([10.0, 20.0, 30.0, 40.0, 50.0])
        lcc, _ = largest_connected_component(g)
        assert np.allclose(lcc.attribute, [30.0, 40.0, 50.0])


class TestEligibility:
    def test_direct_predicate(self):
        g = SocialGraph.from_edges([(0, 1), (1, 2)], n_nodes=3)
        g.attribute = np.array([10.0, 20.0, 30.0])
        labels, fraction = apply_eligibility(g, EligibilityRule(kind="ge", cutoff=21))
        assert labels.tolist() == [False, False, True]
        assert fraction == pytest.approx(1 / 3)

    def test_between_rule(self):
        g = SocialGraph.from_edges([(0, 1), (1, 2)], n_nodes=3)
        g.attribute = np.array([10.0, 20.0, 30.0])
        labels, _ = apply_eligibility(g, EligibilityRule(kind="between", low=15, high=25))
        assert labels.tolist() == [False, True, False]

    def test_degenerate_fraction_warns(self):
        g = SocialGraph.from_edges([(0, 1)], n_nodes=2)
        g.attribute = np.array([1.0, 2.0])
        with pytest.warns(UserWarning, match="degenerate"):
            apply_eligibility(g, EligibilityRule(kind="ge", cutoff=0.0))

    def test_fraction_monotone_in_cutoff(self):
        rng = np.random.default_rng(3)
        g = SocialGraph.from_edges([(0, 1)], n_nodes=2)
        g = generate_synthetic_graph(50, 4.0, {"law": "uniform", "low": 0, "high": 100}, seed=1)
        prev = 1.1
        for cutoff in np.linspace(0, 100, 23):
            labels = EligibilityRule(kind="ge", cutoff=cutoff).evaluate(g.attribute)
            frac = labels.mean()
            assert frac <= prev + 1e-12
            prev = frac

    def test_rule_for_fraction_hits_target(self):
        g = generate_synthetic_graph(500, 8.0, {"law": "lognormal", "mean": 3, "sigma": 1}, seed=2)
        for target in (0.25, 0.4, 0.55, 0.85):
            rule = rule_for_fraction(g, target)
            _, achieved = apply_eligibility(g, rule)
            assert abs(achieved - target) < 0.02

    def test_rule_for_fraction_le_direction(self):
        g = generate_synthetic_graph(300, 6.0, {"law": "normal", "mean": 0, "std": 1}, seed=4)
        rule = rule_for_fraction(g, 0.3, kind="le")
        assert rule.kind == "le"
        _, achieved = apply_eligibility(g, rule)
        assert abs(achieved - 0.3) < 0.05


class TestSynthetic:
    def test_average_degree_near_target(self):
        g = generate_synthetic_graph(1000, 32.0, {"law": "lognormal"}, seed=7)
        assert abs(g.avg_degree - 32.0) / 32.0 < 0.10

    def test_deterministic_under_seed(self):
        a = generate_synthetic_graph(200, 8.0, {"law": "uniform"}, seed=5)
        b = generate_synthetic_graph(200, 8.0, {"law": "uniform"}, seed=5)
        assert np.array_equal(a.indptr, b.indptr)
        assert np.array_equal(a.indices, b.indices)
        assert np.array_equal(a.attribute, b.attribute)

    def test_degree_above_node_count_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic_graph(10, 32.0, {"law": "uniform"}, seed=1)

    def test_tiny_graph_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic_graph(5, 2.0, {"law": "uniform"}, seed=1)

    def test_connected_and_valid(self):
        g = generate_synthetic_graph(300, 10.0, {"law": "exponential", "scale": 2}, seed=9)
        g.validate()
        _, hist = largest_connected_component(g)
        assert hist == {300: 1}

    def test_attribute_laws(self):
        rng = np.random.default_rng(0)
        for law in ({"law": "uniform", "low": 5, "high": 6},
                    {"law": "normal", "mean": 10, "std": 0.1},
                    {"law": "lognormal", "mean": 0, "sigma": 0.5},
                    {"law": "exponential", "scale": 3.0}):
            x = AttributeLaw.from_dict(law).sample(100, rng)
            assert len(x) == 100 and np.all(np.isfinite(x))
        with pytest.raises(ValueError):
            AttributeLaw.from_dict({"law": "zipf"}).sample(10, rng)


class TestCanonicalForm:
    def test_round_trip_exact(self, tmp_path):
        g = generate_synthetic_graph(120, 6.0, {"law": "lognormal"}, seed=3)
        save_canonical(g, tmp_path / "g", attribute_name="age")
        g2 = load_canonical(tmp_path / "g")
        assert np.array_equal(g.indptr, g2.indptr)
        assert np.array_equal(g.indices, g2.indices)
        assert np.array_equal(g.attribute, g2.attribute)

    def test_round_trip_idempotent(self, tmp_path):
        g = generate_synthetic_graph(60, 4.0, {"law": "uniform"}, seed=8)
        save_canonical(g, tmp_path / "a")
        g2 = load_canonical(tmp_path / "a")
        save_canonical(g2, tmp_path / "b")
        for name in ("edges.txt", "attributes.csv"):
            assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()

    def test_id_map_preserved(self, tmp_path):
        path = write(tmp_path, "e.txt", "x y\ny z\n")
        g = load_edge_list(path)
        save_canonical(g, tmp_path / "g")
        g2 = load_canonical(tmp_path / "g")
        assert g2.id_map == g.id_map


class TestSocialGraph:
    def test_validate_catches_asymmetry(self):
        g = SocialGraph(
            indptr=np.array([0, 1, 1]),
            indices=np.array([1], dtype=np.int32),
        )
        with pytest.raises(ValueError, match="asymmetric|corrupt"):
            g.validate()

    def test_edge_array_round_trip(self):
        g = generate_synthetic_graph(50, 4.0, {"law": "uniform"}, seed=2)
        g2 = SocialGraph.from_edges(g.edge_array(), n_nodes=g.n_nodes)
        assert np.array_equal(g.indices, g2.indices)

    def test_has_edge(self):
        g = SocialGraph.from_edges([(0, 1), (1, 2)], n_nodes=3)
        assert g.has_edge(0, 1) and g.has_edge(1, 0)
        assert not g.has_edge(0, 2)
