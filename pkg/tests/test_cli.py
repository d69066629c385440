import csv
import subprocess
import sys

from termitehill.cli import main
from termitehill.scenario import shipped_profiles

SMALL = "protocol = termite-hill\nname = small\nnodes = 6\nduration = 10\nreplications = 2\n"


def small_file(tmp_path, extra=""):
    p = tmp_path / "small.scn"
    p.write_text(SMALL + extra)
    return p


def test_validate_shipped_profiles(capsys):
    for name in shipped_profiles():
        assert main(["validate", name]) == 0
        assert "protocol = termite-hill" in capsys.readouterr().out


def test_run_writes_csv(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(small_file(tmp_path)), "--out", str(out), "--protocol", "sc", "--seed", "5"]) == 0
    rows = list(csv.reader(open(out / "small-sc-n6.csv")))
    assert rows[1][0] == "sc" and rows[1][4] == "5" and rows[-1][3] == "aggregate"
    assert (out / "small-sc-n6-summary.csv").exists()


def test_run_with_trace(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(small_file(tmp_path)), "--out", str(out), "--trace", "--replications", "1"]) == 0
    assert (out / "traces" / "small-termite-hill-n6-run0.trace").stat().st_size > 0


def test_sweep(tmp_path):
    out = tmp_path / "out"
    args = ["sweep", str(small_file(tmp_path)), "--out", str(out), "--nodes", "4,6", "--protocols", "ff,aodv"]
    assert main(args) == 0
    rows = list(csv.reader(open(out / "small-sweep.csv")))
    groups = [(r[0], r[2]) for r in rows[1:] if r[3] == "aggregate"]
    assert groups == [("aodv", "4"), ("aodv", "6"), ("ff", "4"), ("ff", "6")]


def test_world(tmp_path):
    out = tmp_path / "w"
    args = ["world", "--termites", "20", "--woods", "10", "--size", "20", "--steps", "50", "--seeds", "2",
            "--out", str(out)]
    assert main(args) == 0
    assert (out / "world-t20-w10-s20-seed1.csv").exists()
    assert (out / "world-t20-w10-s20-seed2.csv").exists()
    assert len(open(out / "world-t20-w10-s20-mean.csv").read().splitlines()) == 52


def test_configuration_errors_exit_1(tmp_path, capsys):
    assert main(["run", str(small_file(tmp_path, "replications = 0\n"))]) == 1
    assert main(["validate", "nowhere"]) == 1
    assert main(["run", str(small_file(tmp_path)), "--protocol", "ospf"]) == 1
    assert main(["run", str(small_file(tmp_path)), "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main([]) == 1
    assert main(["world", "--size", "2", "--woods", "3", "--termites", "3"]) == 1


def test_runtime_failure_exits_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert main(["run", str(small_file(tmp_path)), "--out", str(blocker / "sub")]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "termitehill", "validate", "table1-dynamic"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "sink_mode = dynamic" in r.stdout
