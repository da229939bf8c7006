"""Command-line entry point: gen-topology, lower-bound, train, baseline, sweep."""
from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import BASELINES, lower_bound_action, run_baseline
from .config import ExperimentConfig, load_config
from .drl import MODES, train
from .env import RelayEnv
from .errors import ConfigError
from .network import ChannelRealization, enhance_channels, generate_channels, relay_config
from .neural import dumps
from .phy import throughput
from .results import ResultRow, emit_csv, modes_to_bits
from .sweep import run_sweep

log = logging.getLogger("hybridrelay")


def _cx(a) -> list:
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _uncx(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def instance_record(cfg: ExperimentConfig, seed: int) -> dict:
    env_cfg = cfg.env_config()
    ch = generate_channels(env_cfg.topology, env_cfg.path_loss, seed)
    top = env_cfg.topology
    return {
        "seed": seed, "antennas": top.antennas, "hap": list(top.hap), "receiver": list(top.receiver),
        "relays": [list(r) for r in top.relays], "p_t_dbm": cfg.p_t_dbm[0], "L_e_db": cfg.L_e_db[0],
        "eta": cfg.eta, "gamma_max": cfg.gamma_max,
        "channels": {"f0": _cx(ch.f0), "f": _cx(ch.f), "g": _cx(ch.g), "z": _cx(ch.z)},
    }


def channels_from_record(rec: dict) -> ChannelRealization:
    c = rec["channels"]
    return ChannelRealization(_uncx(c["f0"]), _uncx(c["f"]), _uncx(c["g"]), _uncx(c["z"]))


def _config(args) -> ExperimentConfig:
    return load_config(args.config) if args.config else ExperimentConfig()


def _seed(args, cfg) -> int:
    return args.seed if args.seed is not None else cfg.seeds[0]


def _run_dir(args, name: str) -> Path:
    d = Path(args.out) / name
    d.mkdir(parents=True, exist_ok=True)
    if args.config:
        shutil.copyfile(args.config, d / "config.copy")
    else:
        (d / "config.copy").write_text("# defaults\n", encoding="utf-8")
    return d


def cmd_gen_topology(args) -> int:
    cfg = _config(args)
    rec = instance_record(cfg, _seed(args, cfg))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"instance-seed{rec['seed']}.json"
    path.write_text(json.dumps(rec, indent=1) + "\n", encoding="utf-8")
    print(path)
    return 0


def cmd_lower_bound(args) -> int:
    cfg = _config(args)
    if args.instance:
        try:
            rec = json.loads(Path(args.instance).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read instance {args.instance}: {exc}") from exc
    else:
        rec = instance_record(cfg, _seed(args, cfg))
    ch = channels_from_record(rec)
    env_cfg = cfg.env_config(rec.get("p_t_dbm"), rec.get("L_e_db"), ch.N)
    modes = np.array([int(c) for c in args.modes]) if args.modes else np.zeros(ch.N, dtype=int)
    if modes.shape != (ch.N,):
        raise ConfigError(f"--modes needs {ch.N} bits")
    s = cfg.solver
    action, value = lower_bound_action(ch, env_cfg, modes, s.eps, s.lam_tol, s.max_iter)
    enh = enhance_channels(ch, relay_config(modes, action.phases, env_cfg.gamma_max))
    result = {"seed": rec.get("seed"), "modes": modes_to_bits(modes), "value": value, "t": action.t,
              "w0": _cx(action.w0), "w1": _cx(action.w1), "phases": action.phases.tolist(),
              "relay_powers": np.asarray(action.relay_powers).tolist(),
              "throughput": throughput(enh, action, env_cfg.budget)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "lower_bound.json").write_text(json.dumps(result, indent=1) + "\n", encoding="utf-8")
    print(f"value={value:.6g} t={action.t:.6g} throughput={result['throughput']:.6g}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    seed = _seed(args, cfg)
    mode = args.mode or cfg.mode
    run = _run_dir(args, f"{mode}-seed{seed}")
    env = RelayEnv(cfg.env_config())
    rows, timing = [], []

    def emit(rec):
        ms = rec.runtime_s * 1e3
        rows.append(ResultRow(mode, cfg.p_t_dbm[0], cfg.L_e_db[0], env.config.N, seed, rec.episode,
                              rec.reward_mean, rec.reward_std, ms if cfg.record_runtime else 0.0,
                              modes_to_bits(rec.modes)))
        timing.append(ms)

    agents, _ = train(env, cfg.agent, mode, seed, cfg.episodes, callback=emit)
    ck = run / "checkpoints"
    ck.mkdir(exist_ok=True)
    (ck / "final.ckpt").write_bytes(dumps(agents.networks()))
    emit_csv(rows, run / "results.csv")
    _write_timing(run / "timing.csv", [(r.episode, ms) for r, ms in zip(rows, timing)])
    print(run / "results.csv")
    return 0


def _write_timing(path: Path, pairs) -> None:
    lines = ["index,runtime_ms"] + [f"{i},{ms:.3f}" for i, ms in pairs]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_baseline(args) -> int:
    cfg = _config(args)
    seed = _seed(args, cfg)
    env_cfg = cfg.env_config()
    ch = generate_channels(env_cfg.topology, env_cfg.path_loss, (seed, 0))
    rows = []
    for scheme in BASELINES:
        r = run_baseline(scheme, ch, env_cfg, np.random.default_rng([seed, 0, 99]))
        rows.append(ResultRow(scheme, cfg.p_t_dbm[0], cfg.L_e_db[0], ch.N, seed, 0, r, 0.0, 0.0,
                              "" if scheme == "dl_only" else "0" * ch.N))
        print(f"{scheme}: {r:.6g}")
    run = _run_dir(args, f"baseline-seed{seed}")
    emit_csv(rows, run / "results.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg = _replace_seeds(cfg, (args.seed,))
    run = _run_dir(args, "sweep")
    rows, info = run_sweep(cfg)
    emit_csv(rows, run / "results.csv")
    _write_timing(run / "timing.csv", [(i, ms) for i, (_, ms, _) in enumerate(info)])
    errors = [f"{c}: {e}" for c, _, e in info if e]
    if errors:
        (run / "errors.log").write_text("\n".join(errors) + "\n", encoding="utf-8")
    print(run / "results.csv")
    return 0


def _replace_seeds(cfg, seeds):
    from dataclasses import replace
    return replace(cfg, seeds=seeds)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI-style experiment configuration file")
    common.add_argument("--seed", type=int, metavar="U64", help="random seed (overrides the config seeds)")
    common.add_argument("--out", metavar="DIR", default="runs", help="output directory (default: runs)")
    common.add_argument("--mode", choices=MODES, help="agent variant for train")
    p = argparse.ArgumentParser(
        prog="hybridrelay", description="Hybrid active/passive relay simulator.",
        epilog="Every command accepts --config PATH, --seed U64, --out DIR (default: runs) and "
               "--mode {model_free,simplified,full_opt}; see '<command> --help'. "
               "Exit status: 0 ok, 1 runtime error, 2 config or usage error.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-topology", parents=[common], help="write a channel instance file")
    lb = sub.add_parser("lower-bound", parents=[common], help="solve the throughput lower bound")
    lb.add_argument("--instance", metavar="PATH", help="instance file from gen-topology")
    lb.add_argument("--modes", metavar="BITS", help="relay modes as a bitstring, 1 = passive")
    sub.add_parser("train", parents=[common], help="train the two-level agent")
    sub.add_parser("baseline", parents=[common], help="evaluate the reference schemes")
    sub.add_parser("sweep", parents=[common], help="run a parameter sweep")
    return p


COMMANDS = {"gen-topology": cmd_gen_topology, "lower-bound": cmd_lower_bound, "train": cmd_train,
            "baseline": cmd_baseline, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
