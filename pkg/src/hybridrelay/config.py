"""Experiment configuration read from an INI-style key/value file.

Every section and key is optional; unknown ones are rejected. Lists are comma
separated, relay positions are ``x,y`` pairs separated by semicolons. Powers
are given in dBm and attenuations in dB; conversion to linear units happens
here and nowhere else.

    [network]
    antennas = 3
    hap = 0,0
    receiver = 10,0
    relays = 4,1; 4,-1; 5,0; 6,1; 6,-1

    [channel]
    unit_loss_db = 25
    exponent = 2
    noise_dbm = -80
    L_e_db = 35

    [power]
    p_t_dbm = 0
    eta = 0.6
    gamma_max = 0.5

    [experiment]
    N = 5
    seeds = 0
    episodes = 300
    episode_length = 100
    mode = full_opt
    schemes = opt, max_dl, max_energy, random, dl_only
    draws = 1
    record_runtime = false
    workers = 1

    [solver]
    eps = 0.01
    lam_tol = 0.001
    max_iter = 200

    [env]
    e_max = 10
    e_init = 0
    p_c = 0.001

    [agent]
    gamma = 0.9        # any AgentConfig field
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .drl import MODES, AgentConfig
from .env import EnvConfig
from .errors import ConfigError
from .network import DEFAULT_RELAYS, PathLossModel, Topology
from .phy import LinkBudget

SCHEMES = ("opt", "max_dl", "max_energy", "random", "dl_only", *MODES)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class SolverSettings:
    eps: float = 1e-2
    lam_tol: float = 1e-3
    max_iter: int = 200


@dataclass(frozen=True)
class ExperimentConfig:
    topology: Topology = field(default_factory=Topology)
    unit_loss_db: float = 25.0
    exponent: float = 2.0
    noise_dbm: float = -80.0
    L_e_db: tuple[float, ...] = (35.0,)
    p_t_dbm: tuple[float, ...] = (0.0,)
    eta: float = 0.6
    gamma_max: float = 0.5
    N: tuple[int, ...] = (5,)
    seeds: tuple[int, ...] = (0,)
    episodes: int = 300
    episode_length: int = 100
    mode: str = "full_opt"
    schemes: tuple[str, ...] = ("opt", "max_dl", "max_energy", "random", "dl_only")
    draws: int = 1
    record_runtime: bool = False
    workers: int = 1
    solver: SolverSettings = field(default_factory=SolverSettings)
    e_max: float = 10.0
    e_init: float = 0.0
    p_c: float = 1e-3
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self):
        for name in ("L_e_db", "p_t_dbm", "N", "seeds", "schemes"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if any(n < 1 or n > self.topology.n_relays for n in self.N):
            raise ConfigError(f"N values must lie in 1..{self.topology.n_relays}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme(s): {', '.join(bad)}")
        if self.episodes < 1 or self.episode_length < 1 or self.draws < 1 or self.workers < 1:
            raise ConfigError("episodes, episode_length, draws and workers must be >= 1")
        if not 0 < self.eta <= 1 or not 0 <= self.gamma_max <= 1:
            raise ConfigError("eta must lie in (0, 1] and gamma_max in [0, 1]")

    def path_loss(self, L_e_db: float) -> PathLossModel:
        return PathLossModel(self.unit_loss_db, self.exponent, self.noise_dbm, L_e_db)

    def budget(self, p_t_dbm: float) -> LinkBudget:
        return LinkBudget(dbm_to_mw(p_t_dbm), self.eta)

    def env_config(self, p_t_dbm: float | None = None, L_e_db: float | None = None,
                   n: int | None = None) -> EnvConfig:
        p_t_dbm = self.p_t_dbm[0] if p_t_dbm is None else p_t_dbm
        L_e_db = self.L_e_db[0] if L_e_db is None else L_e_db
        n = self.N[0] if n is None else n
        return EnvConfig(self.topology.with_relays(n), self.path_loss(L_e_db), self.budget(p_t_dbm),
                         self.gamma_max, self.e_max, self.e_init, self.p_c, self.episode_length)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _point(s: str) -> tuple[float, float]:
    x, y = _floats(s)
    return (x, y)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_KEYS = {
    "network": {"antennas": int, "hap": _point, "receiver": _point,
                "relays": lambda s: tuple(_point(p) for p in s.split(";") if p.strip())},
    "channel": {"unit_loss_db": float, "exponent": float, "noise_dbm": float, "L_e_db": _floats},
    "power": {"p_t_dbm": _floats, "eta": float, "gamma_max": float},
    "experiment": {"N": _ints, "seeds": _ints, "episodes": int, "episode_length": int,
                   "mode": str.strip, "schemes": lambda s: tuple(v.strip() for v in s.split(",") if v.strip()),
                   "draws": int, "record_runtime": _bool, "workers": int},
    "solver": {"eps": float, "lam_tol": float, "max_iter": int},
    "env": {"e_max": float, "e_init": float, "p_c": float},
}


def _agent_types():
    return {f.name: type(f.default) for f in dataclasses.fields(AgentConfig)}


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"))
    cp.optionxform = str  # keep key case (L_e_db, N)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values: dict = {}
    agent: dict = {}
    solver: dict = {}
    net: dict = {}
    agent_types = _agent_types()
    for sec in cp.sections():
        if sec == "agent":
            for key, raw in cp.items(sec):
                if key not in agent_types:
                    raise ConfigError(f"unknown key [agent] {key}")
                conv = _bool if agent_types[key] is bool else agent_types[key]
                agent[key] = _convert(sec, key, conv, raw)
            continue
        if sec not in _KEYS:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in _KEYS[sec]:
                raise ConfigError(f"unknown key [{sec}] {key}")
            v = _convert(sec, key, _KEYS[sec][key], raw)
            {"network": net, "solver": solver}.get(sec, values)[key] = v
    try:
        if net:
            base = Topology()
            values["topology"] = Topology(net.get("hap", base.hap), net.get("receiver", base.receiver),
                                          net.get("relays", DEFAULT_RELAYS), net.get("antennas", base.antennas))
        if solver:
            values["solver"] = SolverSettings(**solver)
        if agent:
            values["agent"] = AgentConfig(**agent)
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _convert(sec, key, conv, raw):
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for [{sec}] {key}: {raw!r}") from exc


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from exc
    return parse_config(text)
