"""Command line interface and exit codes."""

import os

import pytest

from suair.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, main

QUICK_RUN = """
run.total_steps = 400
run.eval_interval = 200
run.eval_trials = 2
run.seeds = 1
env.preset = corridor9
advising.strategy = EA
advising.budget = 20
rl.replay_min = 100
rl.hidden = 8,8
"""


def write_cfg(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestListPresets:
    def test_lists_all(self, capsys):
        assert main(["list-presets"]) == EXIT_OK
        out = capsys.readouterr().out
        for preset in ("open5", "corridor9", "maze7", "slip5"):
            assert preset in out


class TestRun:
    def test_run_writes_outputs(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, QUICK_RUN)
        out_dir = str(tmp_path / "out")
        assert main(["run", "--config", cfg, "--out", out_dir]) == EXIT_OK
        printed = capsys.readouterr().out
        assert "aggregate" in printed
        assert os.path.exists(os.path.join(out_dir, "ea_corridor9_seed1.csv"))

    def test_seed_offset(self, tmp_path):
        cfg = write_cfg(tmp_path, QUICK_RUN)
        out_dir = str(tmp_path / "out")
        assert main(["run", "--config", cfg, "--out", out_dir,
                     "--seed-offset", "41"]) == EXIT_OK
        assert os.path.exists(os.path.join(out_dir, "ea_corridor9_seed42.csv"))

    def test_unknown_key_exits_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "run.bogus = 1\n")
        assert main(["run", "--config", cfg]) == EXIT_CONFIG
        assert "unknown key" in capsys.readouterr().err

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG

    def test_divergence_exits_3(self, tmp_path):
        cfg = write_cfg(tmp_path, QUICK_RUN + "rl.learning_rate = 1e80\n")
        out_dir = str(tmp_path / "out")
        assert main(["run", "--config", cfg, "--out", out_dir]) == EXIT_DIVERGED


class TestTeacherCommands:
    def test_pretrain_oracle_and_evaluate(self, tmp_path, capsys):
        ckpt = str(tmp_path / "teacher.net")
        assert main(["pretrain-teacher", "--env", "corridor9",
                     "--mode", "oracle", "--out", ckpt]) == EXIT_OK
        assert os.path.exists(ckpt)
        assert main(["evaluate", "--checkpoint", ckpt, "--env", "corridor9",
                     "--trials", "3"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "optimal return" in out
        returned = float(out.splitlines()[-2].split()[1])
        optimal = float(out.splitlines()[-1].split()[-1])
        assert returned == pytest.approx(optimal, abs=1e-6)

    def test_evaluate_missing_checkpoint_exits_2(self, tmp_path):
        assert main(["evaluate", "--checkpoint", str(tmp_path / "no.net"),
                     "--env", "open5"]) == EXIT_CONFIG
