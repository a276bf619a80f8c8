import json
import os
import subprocess
import sys

import pytest

from slpsim.cli import main
from slpsim.experiment import ExperimentConfig


def _tree(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in files:
            path = os.path.join(dirpath, name)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


SUBCOMMANDS = ["calibrate", "figure3", "figure4", "figure5", "variants", "run"]


@pytest.mark.parametrize("command", SUBCOMMANDS)
def test_subcommand_byte_identical(command, table_path, tmp_path):
    trees = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        argv = [command, "--quick", "--runs", "2", "--seed", "11", "--table", table_path,
                "--no-generate", "--out", str(out)]
        if command in ("figure3", "figure4", "figure5"):
            argv += ["--d", "100"]
        assert main(argv) == 0
        trees.append(_tree(out))
    assert trees[0] and trees[0] == trees[1]


def test_critvals_byte_identical(tmp_path):
    blobs = []
    for k in range(2):
        path = tmp_path / f"cv{k}.txt"
        assert main(["critvals", "--quick", "--table", str(path)]) == 0
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]
    assert blobs[0].startswith(b"# ad-exp-critvals v1 mc_replicates=100000 seed=0")


def test_run_with_config_file(table_path, tmp_path):
    cfg = ExperimentConfig(runs=2).updated(**{"eve.axis": "round", "scheduler.d": 10})
    path = tmp_path / "exp.cfg"
    path.write_text(cfg.to_text())
    out = tmp_path / "res"
    assert main(["run", "--config", str(path), "--table", table_path, "--no-generate",
                 "--out", str(out)]) == 0
    assert ExperimentConfig.load(out / "config.echo") == cfg
    assert len((out / "fa_series.csv").read_text().splitlines()) == 81


def test_figure_layout_and_variants_report(table_path, tmp_path):
    out = tmp_path / "v"
    assert main(["variants", "--runs", "2", "--table", table_path, "--no-generate",
                 "--out", str(out)]) == 0
    report = json.loads((out / "variants.json").read_text())
    assert sorted(report["variants"]) == ["baseline", "group", "reference"]
    assert sorted(os.listdir(out)) == ["baseline", "group", "reference", "variants.json"]


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["run", "--table", str(tmp_path / "missing.txt"), "--no-generate",
                 "--out", str(tmp_path)]) == 2
    assert "slpsim: error:" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("scheduler.d = 5000\n")
    assert main(["run", "--config", str(bad), "--table", str(tmp_path / "x.txt"),
                 "--no-generate"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["nosuch"])
    assert exc.value.code != 0


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "slpsim.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
