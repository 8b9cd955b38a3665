import subprocess
import sys
from pathlib import Path

import pytest

from artsim.cli import SchemaMismatch, main, parse_grid, read_csv, write_report
from artsim.harness import CSV_COLUMNS

GOLDEN = Path(__file__).parent / "golden"

# command, grid, output file; regenerating with these must reproduce tests/golden byte for byte
GOLDEN_RUNS = [
    ("build", "n_clusters=1,16,64;b=2,4", "build.csv"),
    ("bench-exact", "n_clusters=1,16,64,256;b=2,4", "exact.csv"),
    ("bench-range", "n_clusters=16,64;inner=finger-ring,direct-oracle", "range.csv"),
    ("bench-churn", "n_clusters=32,64", "churn.csv"),
    ("bench-failure", "n_clusters=64", "failure.csv"),
    ("bench-load", "n_clusters=32;distribution=uniform,power-law", "load.csv"),
]


@pytest.mark.parametrize("command,grid,name", GOLDEN_RUNS)
def test_golden_replay(tmp_path, capsys, command, grid, name):
    code = main([command, "--config", str(GOLDEN / "golden.cfg"), "--grid", grid, "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes()


def test_config_hash_echoed_for_every_row(tmp_path, capsys):
    main(["bench-exact", "--grid", "n_clusters=16,64;b=2,4", "--out", str(tmp_path)])
    echoed = {line.split()[2] for line in capsys.readouterr().out.splitlines() if line.startswith("# config ")}
    rows = read_csv(tmp_path / "exact.csv")
    assert len(echoed) == 4
    assert {r["config_hash"] for r in rows} == echoed


def test_single_cell_one_cluster(tmp_path, capsys):
    assert main(["bench-exact", "--grid", "n_clusters=1", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "exact.csv")
    assert len(rows) == 1 and rows[0]["skeleton_hops_mean"] == "0"


def test_grid_rows_follow_grid_order(tmp_path, capsys):
    main(["bench-exact", "--grid", "n_clusters=1024,16384,131072;inner=direct-oracle;queries=50",
          "--out", str(tmp_path)])
    sizes = [int(r["N_clusters"]) for r in read_csv(tmp_path / "exact.csv")]
    assert sizes == [1024, 16384, 131072]


def test_parse_grid_order():
    cells = parse_grid("n_clusters=16,64;b=2,4")
    assert cells == [{"n_clusters": 16, "b": 2}, {"n_clusters": 16, "b": 4},
                     {"n_clusters": 64, "b": 2}, {"n_clusters": 64, "b": 4}]
    assert parse_grid(None) == [{}]


def test_seed_override_and_env_out(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ART_BENCH_OUT", str(tmp_path / "env"))
    assert main(["bench-exact", "--seed", "5", "--grid", "n_clusters=16;queries=20"]) == 0
    rows = read_csv(tmp_path / "env" / "exact.csv")
    assert rows[0]["seed"] == "5"


@pytest.mark.parametrize("argv", [
    ["bench-exact", "--bogus"],
    ["frobnicate"],
    ["bench-exact", "--grid", "colour=red"],
    ["bench-exact", "--grid", "b=8"],
])
def test_usage_errors_exit_1(argv, tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        code = main(argv + ["--out", str(tmp_path)])
        raise SystemExit(code)
    assert err.value.code == 1


def test_bad_config_file_exits_1(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n_clusters=16\nb=8\n")
    assert main(["build", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "b:" in capsys.readouterr().err


def test_failed_cell_gives_error_row(tmp_path, monkeypatch, capsys):
    import artsim.cli as cli

    real = cli.run_cell

    def flaky(experiment, cfg, out=None):
        if cfg.n_clusters == 64:
            raise RuntimeError("boom")
        return real(experiment, cfg, out)

    monkeypatch.setattr(cli, "run_cell", flaky)
    assert main(["bench-exact", "--grid", "n_clusters=16,64;queries=10", "--out", str(tmp_path)]) == 2
    rows = read_csv(tmp_path / "exact.csv")
    assert [r["op_class"] for r in rows] == ["exact", "error:RuntimeError"]


def test_build_writes_snapshot(tmp_path, capsys):
    assert main(["build", "--grid", "n_clusters=40", "--out", str(tmp_path)]) == 0
    (snap,) = tmp_path.glob("skeleton-*.txt")
    assert snap.read_text().startswith("ART-SKELETON v1")


def test_report_series_and_summary(tmp_path, capsys):
    written = write_report(GOLDEN / "exact.csv", tmp_path)
    names = {p.name for p in written}
    assert "summary.txt" in names
    series = (tmp_path / "query_exact_uniform_4_finger-ring.dat").read_text().splitlines()
    assert series[0].split()[:3] == ["N_total", "N_clusters", "hops_mean"]
    assert [int(line.split()[1]) for line in series[1:]] == [1, 16, 64, 256]
    assert "sub-logarithmic:" in (tmp_path / "summary.txt").read_text()


def test_report_one_row(tmp_path, capsys):
    src = (GOLDEN / "failure.csv").read_text().splitlines()
    one = tmp_path / "one.csv"
    one.write_text("\n".join(src[:2]) + "\n")
    write_report(one, tmp_path)
    dat = list(tmp_path.glob("*.dat"))
    assert len(dat) == 1 and len(dat[0].read_text().splitlines()) == 2
    assert "n/a" in (tmp_path / "summary.txt").read_text()


def test_report_verdict_on_three_point_sweep(tmp_path, capsys):
    rows = [",".join(CSV_COLUMNS)]
    for n, h in ((1024, 5.0), (16384, 6.5), (131072, 8.0)):
        rows.append(f"query,{n},{n},4,1,direct-oracle,uniform,exact,{h},{h},{h},{h},{h},1,6,12,0,1,abc")
    src = tmp_path / "sweep.csv"
    src.write_text("\n".join(rows) + "\n")
    write_report(src, tmp_path)
    assert "sub-logarithmic: yes" in (tmp_path / "summary.txt").read_text()
    src.write_text(src.read_text().replace("8.0,8.0,8.0,8.0,8.0", "9.0,9.0,9.0,9.0,9.0"))
    write_report(src, tmp_path)
    assert "sub-logarithmic: no" in (tmp_path / "summary.txt").read_text()


def test_report_rejects_bad_header(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(SchemaMismatch):
        read_csv(bad)
    assert main(["report", str(bad)]) == 1


def test_selftest_quick_passes(capsys):
    assert main(["selftest", "--quick"]) == 0
    assert "selftest: ok" in capsys.readouterr().out


def test_selftest_mismatch_exits_3(monkeypatch, capsys):
    import artsim.selftest as st

    monkeypatch.setattr(st, "run_selftest", lambda **kw: 4)
    assert main(["selftest", "--quick"]) == 3


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "artsim", "bench-exact", "--grid", "n_clusters=4;queries=5",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.startswith("# config ")
