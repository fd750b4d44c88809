import hashlib
import json
from fractions import Fraction

import pytest

from branchwalk.cli_io import (
    ConfigError,
    ScenarioConfig,
    cmd_analyze,
    load_fixture,
    main,
)

FIXTURES = ["golden_eight_trait", "neutral_chain", "mono_chain", "selective_chain", "selective_two_trait"]

MINIMAL = """
name: tiny
graph:
  vertices:
    - {name: a, birth: 1, death: 0.5}
    - {name: b, birth: "1", death: "1/2"}
  edges:
    - {src: a, dst: b, label: 1}
scaling:
  n: [100]
simulation:
  det_grid: [[1, 0], ["3/2", "-1/2"]]
ensemble:
  replicates: 4
seed: 3
"""


@pytest.mark.parametrize("name", FIXTURES)
def test_fixture_round_trip(name):
    c1 = load_fixture(name)
    c2 = ScenarioConfig.from_text(c1.to_yaml())
    assert c1 == c2
    assert c1.config_hash() == c2.config_hash()


def test_rationals_parsed_exactly():
    c = ScenarioConfig.from_text(MINIMAL)
    assert c.vertices[0][2] == Fraction(1, 2)
    assert c.det_grid[1] == (Fraction(3, 2), Fraction(-1, 2))
    assert c.edges[0][3] == 1  # mu defaults to 1


@pytest.mark.parametrize(
    "bad,field,line",
    [
        (MINIMAL.replace("label: 1}", "label: 0}"), "graph.edges[0].label", 8),
        (MINIMAL.replace("dst: b", "dst: c"), "graph.edges[0].dst", 8),
        (MINIMAL.replace('death: "1/2"', 'death: "x/2"'), "graph.vertices[1].death", 6),
        (MINIMAL.replace("replicates: 4", "replicates: 1"), "ensemble.replicates", 14),
    ],
)
def test_config_errors_name_field_and_line(bad, field, line):
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_text(bad)
    assert exc.value.path == field
    assert exc.value.line == line


def test_zero_label_message_names_edge():
    with pytest.raises(ConfigError, match=r"non-positive label on edge \(a,b\)"):
        ScenarioConfig.from_text(MINIMAL.replace("label: 1}", "label: 0}"))


def test_unreachable_vertex_rejected():
    text = MINIMAL.replace("    - {src: a, dst: b, label: 1}", "    []").replace("  edges:\n    []", "  edges: []")
    with pytest.raises(ConfigError, match="unreachable vertex 1"):
        ScenarioConfig.from_text(text)


def test_analyze_output_byte_identical(tmp_path):
    cfg = load_fixture("golden_eight_trait")
    cmd_analyze(cfg, tmp_path / "a").finalize()
    cmd_analyze(cfg, tmp_path / "b").finalize()
    for name in ("analysis.json", "analysis.txt", "manifest.json", "config.yaml"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["config_hash"] == cfg.config_hash()
    # the manifest hash matches the config written next to it
    again = ScenarioConfig.from_text((tmp_path / "a" / "config.yaml").read_text())
    assert again.config_hash() == man["config_hash"]


def test_cli_analyze_and_exponents(tmp_path, capsys):
    assert main(["analyze", "--config", "fixture:golden_eight_trait", "--out", str(tmp_path / "an")]) == 0
    lines = (tmp_path / "an" / "analysis.txt").read_text().splitlines()
    assert "t=4\ttheta=2\t|A|=1" in lines[3]
    assert main(["exponents", "--config", "fixture:selective_chain", "--out", str(tmp_path / "ex")]) == 0
    ex = json.loads((tmp_path / "ex" / "exponents.json").read_text())
    assert any("SlopeTakeover" in e["kinds"] for e in ex["events"])
    assert main(["exponents", "--config", "fixture:mono_chain", "--out", str(tmp_path / "mo")]) == 0
    mo = json.loads((tmp_path / "mo" / "exponents.json").read_text())
    assert mo["corollary"] == "mono_directional" and all(r["agrees"] for r in mo["rows"])


def test_cli_simulate_is_deterministic(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(MINIMAL.replace("seed: 3", "seed: 3\n").replace("simulation:\n", "simulation:\n  record_log: true\n"))
    digests = []
    for k in range(2):
        out = tmp_path / f"s{k}"
        assert main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
        digests.append(hashlib.sha256((out / "events.bin").read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_cli_ensemble_rows(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(MINIMAL)
    out = tmp_path / "e"
    assert main(["ensemble", "--config", str(cfg), "--out", str(out), "--n-override", "50,60"]) == 0
    rows = (out / "raw.csv").read_text().splitlines()
    assert rows[0] == "replicate_id,n,scale,v,t,s,count,normalizer,ratio,survived"
    assert len(rows) - 1 == 2 * 4 * 2 * 2  # n values x replicates x grid x traits
    comp = json.loads((out / "comparison.json").read_text())
    assert "size_limits" in comp


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(MINIMAL.replace("label: 1}", "label: 0}"))
    assert main(["analyze", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert main(["analyze", "--config", str(tmp_path / "missing.yaml")]) == 1
    over = tmp_path / "over.yaml"
    over.write_text(MINIMAL.replace("simulation:\n", "simulation:\n  max_events: 5\n"))
    assert main(["simulate", "--config", str(over), "--out", str(tmp_path / "o")]) == 3


def test_cli_verify_subset(tmp_path):
    assert main(["verify", "--only", "1,2", "--out", str(tmp_path / "v")]) == 0
    res = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert [r["criterion"] for r in res] == [1, 2] and all(r["passed"] for r in res)


def test_zero_mu_walks_are_flagged(tmp_path):
    cfg = ScenarioConfig.from_text(MINIMAL.replace("label: 1}", "label: 1, mu: 0}"))
    b = cmd_analyze(cfg, tmp_path)
    tr = b.data["analysis.json"]["traits"][1]
    assert tr["zero_mu_walks"] == [[0, 1]]
    assert tr["weight"]["total"] is not None
    assert "zero-mu walks" in (tmp_path / "analysis.txt").read_text()
