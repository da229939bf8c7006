import json
import math

import numpy as np
import pytest

from hybridrelay.baselines import baseline_action, best_modes, run_baseline
from hybridrelay.cli import main
from hybridrelay.config import ExperimentConfig, dbm_to_mw, load_config, parse_config
from hybridrelay.errors import ConfigError
from hybridrelay.env import EnvConfig, EnvState, RelayEnv
from hybridrelay.network import ChannelRealization, PathLossModel, Topology, generate_channels
from hybridrelay.numerics import unit_align
from hybridrelay.results import HEADER, ResultRow, bitmask_to_bits, emit_csv, read_csv
from hybridrelay.sweep import Cell, run_cell, run_sweep

from conftest import crandn

TINY = """
[power]
p_t_dbm = 0

[channel]
L_e_db = 35

[experiment]
N = 2
seeds = 3
episodes = 2
episode_length = 3
schemes = dl_only, max_dl

[agent]
batch_size = 2
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return path


def test_defaults_follow_experiment_setup():
    cfg = ExperimentConfig()
    assert cfg.topology.antennas == 3 and cfg.topology.n_relays == 5
    assert cfg.eta == 0.6 and cfg.gamma_max == 0.5
    assert cfg.unit_loss_db == 25 and cfg.exponent == 2 and cfg.noise_dbm == -80
    assert dbm_to_mw(-10) == pytest.approx(0.1) and dbm_to_mw(10) == pytest.approx(10)


def test_parse_full_config():
    cfg = parse_config("""
[network]
antennas = 2
relays = 3,1; 5,-1
[channel]
L_e_db = 30, 40
[power]
p_t_dbm = -10, 0, 10
[experiment]
N = 1, 2
seeds = 0, 1
mode = simplified
record_runtime = yes
[solver]
eps = 0.05
[agent]
gamma = 0.5
hidden = 32
""")
    assert cfg.topology.relays == ((3.0, 1.0), (5.0, -1.0)) and cfg.topology.antennas == 2
    assert cfg.L_e_db == (30.0, 40.0) and cfg.p_t_dbm == (-10.0, 0.0, 10.0)
    assert cfg.N == (1, 2) and cfg.mode == "simplified" and cfg.record_runtime
    assert cfg.solver.eps == 0.05 and cfg.agent.gamma == 0.5 and cfg.agent.hidden == 32
    env = cfg.env_config(-10.0, 40.0, 1)
    assert env.N == 1 and env.budget.p_t == pytest.approx(0.1)
    assert env.path_loss.direct_extra_attenuation_db == 40


@pytest.mark.parametrize("text", [
    "[nope]\nx = 1",
    "[power]\nwatts = 3",
    "[experiment]\nseeds = 1, 1",
    "[experiment]\nN = 9",
    "[experiment]\nmode = greedy",
    "[experiment]\nschemes = opt, magic",
    "[experiment]\nepisodes = many",
    "[channel]\nL_e_db =",
    "[agent]\ngamma = 1.5",
    "[agent]\nunknown = 1",
    "no section header",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_csv_round_trip(tmp_path):
    rows = [ResultRow("opt", -10.0, 40.0, 5, 0, 0, 1.23456789, 0.0, 0.0, "10100"),
            ResultRow("dl_only", -10.0, 40.0, 5, 1, 0, 0.5, 0.01, 12.5, "")]
    path = emit_csv(rows, tmp_path / "out" / "r.csv")
    text = path.read_text()
    assert text.splitlines()[0] == ",".join(HEADER)
    assert "1.23457" in text
    back = read_csv(path)
    assert back[1] == rows[1] and back[0].reward_mean == pytest.approx(1.23457)
    assert back[0].active_count == 3
    assert read_csv(emit_csv([], tmp_path / "empty.csv")) == []
    assert bitmask_to_bits(5, 5) == "10100"


def test_csv_nan_and_bad_path(tmp_path):
    path = emit_csv([ResultRow("x", 0, 0, 1, 0, 0, math.nan, math.nan, 0, "")], tmp_path / "n.csv")
    assert math.isnan(read_csv(path)[0].reward_mean)
    (tmp_path / "file").write_text("")
    with pytest.raises(OSError, match="file"):
        emit_csv([], tmp_path / "file" / "x.csv")


def test_dl_only_baseline():
    ch = ChannelRealization(np.array([1.0, np.sqrt(2)], complex), np.zeros((1, 2), complex),
                            np.zeros(1, complex), np.zeros((1, 1), complex))
    assert run_baseline("dl_only", ch, EnvConfig()) == pytest.approx(2)


def test_max_energy_single_relay(rng):
    ch = ChannelRealization(crandn(rng, 3), crandn(rng, 1, 3), crandn(rng, 1), np.zeros((1, 1), complex))
    act = baseline_action("max_energy", ch)
    assert abs(np.vdot(act.w0, unit_align(ch.f[0]))) == pytest.approx(1)
    np.testing.assert_array_equal(act.w0, act.w1)


def test_max_dl_beats_random():
    # paired comparison on the unattenuated direct link, where aligning to it pays off
    cfg = EnvConfig()
    wins = 0
    for k in range(100):
        ch = generate_channels(cfg.topology, cfg.path_loss, (5, k))
        wins += run_baseline("max_dl", ch, cfg) >= run_baseline("random", ch, cfg, np.random.default_rng(k))
    assert wins >= 90


@pytest.mark.parametrize("L_e", [30.0, 40.0])
def test_max_dl_beats_random_on_average(L_e):
    cfg = EnvConfig(path_loss=PathLossModel(direct_extra_attenuation_db=L_e))
    diff = []
    for k in range(200):
        ch = generate_channels(cfg.topology, cfg.path_loss, (5, k))
        diff.append(run_baseline("max_dl", ch, cfg) - run_baseline("random", ch, cfg, np.random.default_rng(k)))
    assert np.mean(diff) > 0


def test_unknown_baseline():
    with pytest.raises(ValueError):
        run_baseline("oracle", generate_channels(Topology(), PathLossModel(), 0), EnvConfig())


def test_best_modes_is_best_over_modes():
    cfg = EnvConfig(topology=Topology().with_relays(2), path_loss=PathLossModel(direct_extra_attenuation_db=40))
    ch = generate_channels(cfg.topology, cfg.path_loss, 1)
    res = best_modes(ch, cfg)
    env = RelayEnv(cfg)
    state = EnvState(ch, np.zeros(2), 0)
    assert res.reward == env.evaluate(state, res.action)
    assert res.reward >= run_baseline("max_dl", ch, cfg)


def test_single_cell_sweep(tiny):
    cfg = load_config(tiny)
    rows, info = run_sweep(ExperimentConfig(**{**cfg.__dict__, "schemes": ("dl_only",), "N": (2,)}))
    assert len(rows) == 1 and info[0][2] is None
    assert rows[0].runtime_ms == 0.0


def test_dl_only_independent_of_n():
    cfg = ExperimentConfig(schemes=("dl_only",), N=(1, 3, 5), seeds=(0, 1))
    rows, _ = run_sweep(cfg)
    by_seed = {}
    for r in rows:
        by_seed.setdefault(r.seed, set()).add(r.reward_mean)
    assert all(len(v) == 1 for v in by_seed.values())


def test_failed_cell_is_recorded(monkeypatch):
    import hybridrelay.sweep as sweep

    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(sweep, "run_baseline", boom)
    rows, info = run_sweep(ExperimentConfig(schemes=("max_dl", "dl_only"), N=(1,)))
    assert len(rows) == 2 and all(math.isnan(r.reward_mean) for r in rows)
    assert "solver exploded" in info[0][2]


def test_agent_cell_uses_training(tiny):
    cfg = load_config(tiny)
    row, ms = run_cell(cfg, Cell("model_free", 0.0, 35.0, 2, 3))
    assert row.episode == 2 and row.reward_mean > 0 and ms > 0 and len(row.modes) == 2


def test_cli_help_and_errors(tmp_path, capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    assert all(flag in out for flag in ("--config", "--seed", "--out", "--mode", "--version"))
    for sub in ("train", "sweep"):
        main([sub, "--help"])
        out = capsys.readouterr().out
        assert all(flag in out for flag in ("--config", "--seed", "--out", "--mode"))
    assert main(["train", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["train", "--bogus"]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nmode = greedy\n")
    assert main(["train", "--config", str(bad)]) == 2


def test_cli_train_is_reproducible(tiny, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["train", "--config", str(tiny), "--seed", "7", "--out", str(out), "--mode", "model_free"]) == 0
        run = out / "model_free-seed7"
        assert (run / "config.copy").read_text() == tiny.read_text()
        assert (run / "checkpoints" / "final.ckpt").stat().st_size > 0
        outs.append(((run / "results.csv").read_bytes(), (run / "checkpoints" / "final.ckpt").read_bytes()))
    assert outs[0] == outs[1]
    rows = read_csv(tmp_path / "a" / "model_free-seed7" / "results.csv")
    assert [r.episode for r in rows] == [0, 1] and all(r.seed == 7 for r in rows)


def test_cli_instance_and_lower_bound(tiny, tmp_path):
    assert main(["gen-topology", "--config", str(tiny), "--seed", "4", "--out", str(tmp_path)]) == 0
    inst = tmp_path / "instance-seed4.json"
    rec = json.loads(inst.read_text())
    assert rec["seed"] == 4 and len(rec["channels"]["f0"]) == 3 and len(rec["relays"]) == 2
    assert main(["lower-bound", "--config", str(tiny), "--instance", str(inst), "--modes", "10",
                 "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "lower_bound.json").read_text())
    assert res["modes"] == "10" and res["throughput"] >= res["value"] - 1e-6
    assert main(["lower-bound", "--instance", str(inst), "--modes", "101", "--out", str(tmp_path)]) == 2
    assert main(["lower-bound", "--instance", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2


def test_cli_baseline_and_sweep(tiny, tmp_path):
    assert main(["baseline", "--config", str(tiny), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "baseline-seed3" / "results.csv")
    assert {r.scheme for r in rows} == {"random", "max_dl", "max_energy", "dl_only"}
    assert main(["sweep", "--config", str(tiny), "--seed", "2", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sweep" / "results.csv")
    assert [(r.scheme, r.seed) for r in rows] == [("dl_only", 2), ("max_dl", 2)]
    assert (tmp_path / "sweep" / "timing.csv").exists()
