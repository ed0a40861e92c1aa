import json

import numpy as np
import pytest

from boxdyn.cli import (
    AnalysisConfig,
    load_config,
    load_morse_graph,
    load_mlp_weights,
    load_trajectory_data,
    main,
    run_analysis,
)
from boxdyn.errors import (
    ConfigError,
    DimensionMismatch,
    EmptyDataset,
    ParseError,
)


def write_config(path, **over):
    doc = {
        "domain": {"lower": [-2.0], "upper": [2.0]},
        "depths": [6],
        "rho": 1e-3,
        "prime": 5,
        "oracle": {"type": "piecewise1d", "theta": 1.5},
        "out": str(path.parent / "out"),
    }
    doc.update(over)
    path.write_text(json.dumps(doc))
    return path


class TestWeightsParsing:
    def test_identity_layer(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text(
            "mlp-weights v1\nactivation relu\nlayers 1\n"
            "layer 2 2\n1 0\n0 1\n0 0\n"
        )
        o = load_mlp_weights(p)
        assert o.dimension == 2
        assert o.lipschitz_upper_bound() == pytest.approx(1.0)

    def test_three_layer_bias_composition(self, tmp_path):
        # at the origin with relu: f(0) = W3 relu(W2 relu(b1) + b2) + b3
        p = tmp_path / "w.txt"
        p.write_text(
            "mlp-weights v1\nactivation relu\nlayers 3\n"
            "layer 1 2\n1\n-1\n1 2\n"
            "layer 2 2\n1 0\n0 1\n-0.5 0\n"
            "layer 2 1\n1 1\n0.25\n"
        )
        o = load_mlp_weights(p)
        got = o.eval(np.array([0.0]))
        # relu([1,2])=[1,2]; relu([1-0.5,2])=[0.5,2]; 0.5+2+0.25
        assert got[0] == pytest.approx(2.75)

    def test_mismatched_bias_length(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text(
            "mlp-weights v1\nactivation relu\nlayers 1\n"
            "layer 2 2\n1 0\n0 1\n0 0 0\n"
        )
        with pytest.raises(DimensionMismatch):
            load_mlp_weights(p)

    def test_missing_tag(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text("something else\n")
        with pytest.raises(ParseError):
            load_mlp_weights(p)


class TestTrajectoryLoading:
    def test_single_pair(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("0.5 0.25\n")
        o = load_trajectory_data(p, 2.0)
        assert o.dimension == 1
        assert o.xs.shape == (1, 1)

    def test_comma_separated_with_tag(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("trajectory-pairs v1\n0.1, 0.2, 0.3, 0.4\n")
        o = load_trajectory_data(p, 1.0)
        assert o.dimension == 2

    def test_malformed_row_reports_line_number(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("0.5 0.25\n0.1 oops\n")
        with pytest.raises(ParseError, match=":2:"):
            load_trajectory_data(p, 2.0)

    def test_ragged_row_rejected(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("0.5 0.25\n0.1 0.2 0.3\n")
        with pytest.raises(ParseError, match=":2:"):
            load_trajectory_data(p, 2.0)

    def test_empty_dataset(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("# only a comment\n")
        with pytest.raises(EmptyDataset):
            load_trajectory_data(p, 2.0)


class TestConfigValidation:
    def test_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path / "c.json"))
        assert cfg.depths == [6] and cfg.prime == 5

    def test_rejects_composite_prime(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path / "c.json", prime=6))

    def test_rejects_inverted_domain(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(
                write_config(tmp_path / "c.json",
                             domain={"lower": [2.0], "upper": [-2.0]})
            )

    def test_missing_field(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"domain": {"lower": [0], "upper": [1]}}))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_cache_key_ignores_out_dir(self, tmp_path):
        a = load_config(write_config(tmp_path / "a.json", out="x"))
        b = load_config(write_config(tmp_path / "b.json", out="y"))
        assert a.cache_key() == b.cache_key()


class TestAnalyzeCommand:
    def test_writes_all_outputs(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.json")
        assert main(["analyze", "--config", str(cfg_path)]) == 0
        out = tmp_path / "out"
        for name in ("morse_graph.dot", "morse_graph.json",
                     "regions.csv", "manifest.json"):
            assert (out / name).exists(), name
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["n_boxes"] == 64
        assert manifest["n_morse_nodes"] >= 1
        assert "boxdyn" in manifest["versions"]
        dot = (out / "morse_graph.dot").read_text()
        assert "digraph" in dot and "x - 1" in dot

    def test_json_round_trip_equals_graph(self, tmp_path):
        cfg = load_config(write_config(tmp_path / "c.json"))
        mg, _ = run_analysis(cfg)
        from boxdyn.cli import write_outputs
        write_outputs(cfg, mg, {})
        back = load_morse_graph(tmp_path / "out" / "morse_graph.json")
        assert back.nodes == mg.nodes
        assert back.order == mg.order
        for q in mg.nodes:
            assert back.region_of(q).tolist() == mg.region_of(q).tolist()
            assert back.index_of[q] == mg.index_of[q]

    def test_flag_overrides(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.json")
        out2 = tmp_path / "alt"
        rc = main(["analyze", "--config", str(cfg_path),
                   "--depth", "5", "--rho", "0.002",
                   "--out", str(out2), "--no-cache"])
        assert rc == 0
        manifest = json.loads((out2 / "manifest.json").read_text())
        assert manifest["config"]["depths"] == [5]
        assert manifest["config"]["rho"] == 0.002
        assert not list(out2.glob("boxmap_*.npz"))

    def test_cache_reuse(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.json")
        assert main(["analyze", "--config", str(cfg_path)]) == 0
        caches = list((tmp_path / "out").glob("boxmap_*.npz"))
        assert len(caches) == 1
        stamp = caches[0].stat().st_mtime_ns
        assert main(["analyze", "--config", str(cfg_path)]) == 0
        assert caches[0].stat().st_mtime_ns == stamp  # reused, not rebuilt

    def test_config_error_exit_code(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.json", prime=9)
        assert main(["analyze", "--config", str(cfg_path)]) == 2

    def test_unreadable_config_exit_code(self, tmp_path):
        assert main(["analyze", "--config", str(tmp_path / "nope.json")]) == 2

    def test_oracle_flag_parsing(self, tmp_path):
        rc = main(["analyze", "--domain=-2:2", "--depth", "6",
                   "--rho", "0.001", "--oracle", "piecewise1d:0.5",
                   "--out", str(tmp_path / "o"), "--no-cache"])
        assert rc == 0
        doc = json.loads((tmp_path / "o" / "morse_graph.json").read_text())
        assert len(doc["nodes"]) == 1


class TestCompareCommand:
    def test_emits_nu_report(self, tmp_path):
        fine = write_config(tmp_path / "fine.json", depths=[8],
                            out=str(tmp_path / "f"))
        coarse = write_config(tmp_path / "coarse.json", depths=[6],
                              out=str(tmp_path / "c"))
        rc = main(["compare", "--fine", str(fine), "--coarse", str(coarse),
                   "--out", str(tmp_path / "cmp")])
        assert rc == 0
        report = json.loads((tmp_path / "cmp" / "nu_report.json").read_text())
        assert report["well_defined"]
        assert report["epimorphism_check"]["order_preserving"]
        assert "assignment" in report
