import json

import pytest

from roadperc import cli
from roadperc.geo_io import CATEGORIES, parse_curve_csv
from roadperc.road_graph import write_network_csv

from oracles import grid_paths_jsonl, network, pearson_direct

BARBELL = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]


def summary(out, city):
    return json.loads((out / city / "summary.json").read_text())


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def grid_paths(tmp_path):
    p = tmp_path / "grid.jsonl"
    p.write_text(grid_paths_jsonl(12, 12))
    return p


# -- build -----------------------------------------------------------------------

def test_build_three_road_junction(tmp_path, data_dir):
    out = tmp_path / "out"
    rc = cli.main(["build", "--city", "junc", "--paths", str(data_dir / "junction_paths.jsonl"),
                   "--out", str(out)])
    assert rc == 0
    metrics = json.loads((out / "junc" / "metrics.json").read_text())
    assert metrics["v"] == 5 and metrics["e"] == 4
    assert "4" not in (out / "junc" / "network_nodes.csv").read_text().split()
    s = summary(out, "junc")
    assert s["city_name"] == "junc" and s["metrics"] == metrics


def test_build_tree_meshness(tmp_path, data_dir):
    out = tmp_path / "out"
    assert cli.main(["build", "--city", "tree", "--paths", str(data_dir / "tree_paths.jsonl"),
                     "--out", str(out)]) == 0
    metrics = json.loads((out / "tree" / "metrics.json").read_text())
    assert metrics["meshness"] == 0.0
    assert metrics["v"] == 11


def test_missing_input_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    rc = cli.main(["build", "--city", "x", "--paths", str(missing), "--out", str(tmp_path)])
    assert rc == 2
    assert str(missing) in capsys.readouterr().err


def test_malformed_paths_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"path_id": "p", "nodes": [{"id": "a", "lon": 0, "lat": 0}]}\n')
    assert cli.main(["build", "--city", "x", "--paths", str(bad), "--out", str(tmp_path)]) == 2
    assert "2 nodes" in capsys.readouterr().err


@pytest.mark.parametrize("flag", [["--runs", "0"], ["--checkpoint-fraction", "0.7"],
                                  ["--radius-km", "-1"], ["--recompute-every", "0"],
                                  ["--city", "../evil"]])
def test_config_validation_exit_2(tmp_path, data_dir, flag):
    args = ["percolate", "--city", "c", "--paths", str(data_dir / "tree_paths.jsonl"),
            "--out", str(tmp_path / "out")] + flag
    assert cli.main(args) == 2
    assert not (tmp_path / "out").exists()


# -- percolate -------------------------------------------------------------------

def test_percolate_error_deterministic(tmp_path, grid_paths):
    trees = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["percolate", "--city", "g", "--paths", str(grid_paths), "--out", str(out),
                         "--mode", "error", "--runs", "1", "--seed", "3"]) == 0
        trees.append(tree_bytes(out))
    assert trees[0] == trees[1]
    assert {"g/error_curve.csv", "g/runs_pc.csv", "g/summary.json"} <= trees[0].keys()
    assert "g/attack_curve.csv" not in trees[0]


def test_percolate_both_attack_dominates(tmp_path, grid_paths):
    out = tmp_path / "out"
    assert cli.main(["percolate", "--city", "g", "--paths", str(grid_paths), "--out", str(out),
                     "--runs", "10"]) == 0
    s = summary(out, "g")
    assert s["attack"]["p_c"] < s["error"]["p_c_mean"]
    assert s["error"]["runs"] == 10
    runs = (out / "g" / "runs_pc.csv").read_text().splitlines()
    assert runs[0] == "run_index,p_c" and len(runs) == 11
    curve = parse_curve_csv((out / "g" / "attack_curve.csv").read_text())
    assert curve[-1][1] == curve[-1][2]


def test_percolate_barbell_from_dump(tmp_path):
    out = tmp_path / "out"
    (out / "bb").mkdir(parents=True)
    nodes, edges = write_network_csv(network(6, BARBELL))
    (out / "bb" / "network_nodes.csv").write_text(nodes)
    (out / "bb" / "network_edges.csv").write_text(edges)
    assert cli.main(["percolate", "--city", "bb", "--out", str(out), "--mode", "attack"]) == 0
    assert summary(out, "bb")["attack"]["p_c"] == 1 / 7


def test_percolate_without_network_exit_2(tmp_path):
    assert cli.main(["percolate", "--city", "none", "--out", str(tmp_path)]) == 2


def test_runtime_failure_exit_1_and_nothing_written(tmp_path, grid_paths, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("simulated")
    monkeypatch.setattr(cli, "run_attack", boom)
    out = tmp_path / "out"
    rc = cli.main(["run", "--city", "g", "--paths", str(grid_paths), "--out", str(out),
                   "--runs", "2"])
    assert rc == 1
    assert not out.exists() or not any(p.is_file() for p in out.rglob("*"))


# -- services --------------------------------------------------------------------

def write_venues(path, rows):
    path.write_text("venue_id,category,lat,lon\n" +
                    "".join(f'{v},"{c}",{lat},{lon}\n' for v, c, lat, lon in rows))


def test_services_baseline_and_omitted(tmp_path, grid_paths, capsys):
    # grid nodes sit at lon 2.0 + 0.001 j, lat 41.0 + 0.001 i
    rows = [(f"v{k}", c, 41.0 + 0.001 * (k % 12), 2.0 + 0.001 * (k % 11) + 0.001)
            for k, c in enumerate(CATEGORIES)]
    rows.append(("far", "Food", 41.5, 2.0))
    venues = tmp_path / "venues.csv"
    write_venues(venues, rows)
    out = tmp_path / "out"
    rc = cli.main(["services", "--city", "g", "--paths", str(grid_paths), "--venues", str(venues),
                   "--out", str(out), "--runs", "3"])
    assert rc == 0
    assert "omitted 1 of 11 venues" in capsys.readouterr().out
    s = summary(out, "g")
    assert all(s["availability"]["baseline"][c] == 1.0 for c in CATEGORIES)
    assert s["availability"]["baseline"]["mean"] == 1.0
    assert s["services"]["omitted"] == 1
    for scheme in ("error", "attack"):
        lines = (out / "g" / f"availability_{scheme}.csv").read_text().splitlines()
        assert lines[0] == "category,assigned,retained,fraction"
        assert len(lines) == 11
        assert 0.0 <= s["availability"][scheme]["mean"] <= 1.0


def test_services_flags_missing_category(tmp_path, grid_paths):
    venues = tmp_path / "venues.csv"
    write_venues(venues, [("v1", "Food", 41.0, 2.001)])
    out = tmp_path / "out"
    assert cli.main(["services", "--city", "g", "--paths", str(grid_paths), "--venues", str(venues),
                     "--out", str(out), "--mode", "attack"]) == 0
    s = summary(out, "g")
    assert len(s["services"]["missing_categories"]) == 9
    text = (out / "g" / "availability_attack.csv").read_text()
    assert "Residence,0,0,NA" in text


def test_services_unknown_category_exit_2(tmp_path, grid_paths):
    venues = tmp_path / "venues.csv"
    write_venues(venues, [("v1", "Hospitals", 41.0, 2.0)])
    assert cli.main(["services", "--city", "g", "--paths", str(grid_paths), "--venues", str(venues),
                     "--out", str(tmp_path / "out")]) == 2


def test_pipeline_merges_summary(tmp_path, grid_paths):
    out = tmp_path / "out"
    base = ["--city", "g", "--out", str(out)]
    assert cli.main(["build", "--paths", str(grid_paths)] + base) == 0
    assert cli.main(["percolate", "--runs", "2"] + base) == 0
    s = summary(out, "g")
    assert list(s) == ["city_name", "metrics", "conventions", "error", "attack"]


# -- report ----------------------------------------------------------------------

def fake_summary(city, err, att):
    return {"city_name": city, "error": {"p_c_mean": err, "p_c_std": 0.0, "runs": 50},
            "attack": {"p_c": att}}


def test_report_single_city():
    report, ranking = cli.build_report([fake_summary("a", 0.3, 0.05)])
    assert len(report["ranking"]["error"]) == 1
    assert "pearson_error_attack" not in report
    assert ranking.splitlines()[0] == "scheme,rank,city,p_c"


def test_report_identical_vectors():
    report, _ = cli.build_report([fake_summary("a", 0.3, 0.3), fake_summary("b", 0.2, 0.2)])
    assert report["pearson_error_attack"] == 1.0


def test_report_five_cities():
    err = [0.17, 0.35, 0.22, 0.30, 0.26]
    att = [0.05, 0.02, 0.09, 0.01, 0.04]
    cities = [fake_summary(f"c{i}", e, a) for i, (e, a) in enumerate(zip(err, att))]
    report, ranking = cli.build_report(cities)
    assert report["pearson_error_attack"] == pytest.approx(pearson_direct(err, att), abs=1e-12)
    assert [r["city"] for r in report["ranking"]["error"]] == ["c0", "c2", "c4", "c3", "c1"]
    assert ranking.splitlines()[1] == "error,1,c0,0.170000"


def test_cmd_report_on_disk(tmp_path):
    out = tmp_path / "out"
    for i, (e, a) in enumerate([(0.2, 0.03), (0.3, 0.05), (0.25, 0.01)]):
        (out / f"c{i}").mkdir(parents=True)
        (out / f"c{i}" / "summary.json").write_text(json.dumps(fake_summary(f"c{i}", e, a)))
    assert cli.main(["report", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["cities"] == ["c0", "c1", "c2"]
    assert "pearson_error_attack" in report
    assert (out / "ranking.csv").read_text().count("\n") == 7


def test_module_entry_point(tmp_path, data_dir):
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "roadperc", "build", "--city", "t",
                          "--paths", str(data_dir / "tree_paths.jsonl"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr


def test_verbose_flag_either_position(tmp_path, data_dir):
    tree = str(data_dir / "tree_paths.jsonl")
    for argv in (["-v", "build"], ["build", "-v"]):
        assert cli.main(argv + ["--city", "t", "--paths", tree, "--out", str(tmp_path)]) == 0
