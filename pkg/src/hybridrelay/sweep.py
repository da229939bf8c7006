"""Cartesian experiment sweeps over scheme x p_t x L_e x N x seed."""
from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import BASELINES, best_modes, run_baseline
from .config import ExperimentConfig
from .drl import MODES, train
from .env import RelayEnv
from .network import generate_channels
from .results import ResultRow, modes_to_bits

log = logging.getLogger(__name__)
LAST_EPISODES = 50


@dataclass(frozen=True)
class Cell:
    scheme: str
    p_t_dbm: float
    L_e_db: float
    N: int
    seed: int


def cells(cfg: ExperimentConfig) -> list[Cell]:
    return [Cell(*c) for c in itertools.product(cfg.schemes, cfg.p_t_dbm, cfg.L_e_db, cfg.N, cfg.seeds)]


def _modal(vectors) -> str:
    """Most frequent mode string; ties go to the first seen."""
    counts: dict[str, int] = {}
    for v in vectors:
        counts[v] = counts.get(v, 0) + 1
    return max(counts, key=lambda k: counts[k])


def run_cell(cfg: ExperimentConfig, cell: Cell) -> tuple[ResultRow, float]:
    """One row plus its measured wall-clock time in ms."""
    t0 = time.perf_counter()
    env_cfg = cfg.env_config(cell.p_t_dbm, cell.L_e_db, cell.N)
    episode = 0
    if cell.scheme in MODES:
        env = RelayEnv(env_cfg)
        _, recs = train(env, cfg.agent, cell.scheme, cell.seed, cfg.episodes)
        tail = [r.reward_mean for r in recs[-LAST_EPISODES:]]
        rewards = np.array(tail)
        modes = modes_to_bits(recs[-1].modes)
        episode = len(recs)
    else:
        rewards, mvecs = [], []
        for d in range(cfg.draws):
            ch = generate_channels(env_cfg.topology, env_cfg.path_loss, (cell.seed, d))
            if cell.scheme == "opt":
                s = cfg.solver
                res = best_modes(ch, env_cfg, s.eps, s.lam_tol, s.max_iter)
                rewards.append(res.reward)
                mvecs.append(modes_to_bits(res.modes))
            else:
                rng = np.random.default_rng([cell.seed, d, 99])
                rewards.append(run_baseline(cell.scheme, ch, env_cfg, rng))
                mvecs.append("" if cell.scheme == "dl_only" else "0" * cell.N)
        rewards = np.array(rewards)
        modes = _modal(mvecs)
    ms = (time.perf_counter() - t0) * 1e3
    row = ResultRow(cell.scheme, cell.p_t_dbm, cell.L_e_db, cell.N, cell.seed, episode,
                    float(rewards.mean()), float(rewards.std()), ms if cfg.record_runtime else 0.0, modes)
    return row, ms


def _safe_cell(args):
    cfg, cell = args
    try:
        return run_cell(cfg, cell), None
    except Exception as exc:  # a failed cell must not stop the sweep
        row = ResultRow(cell.scheme, cell.p_t_dbm, cell.L_e_db, cell.N, cell.seed, 0,
                        float("nan"), float("nan"), 0.0, "")
        return (row, 0.0), f"{type(exc).__name__}: {exc}"


def run_sweep(cfg: ExperimentConfig):
    """Rows in deterministic cell order, with (cell, wall ms, error or None) records."""
    todo = [(cfg, c) for c in cells(cfg)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_safe_cell, todo))
    else:
        results = [_safe_cell(a) for a in todo]
    rows, info = [], []
    for (_, cell), ((row, ms), err) in zip(todo, results):
        if err:
            log.warning("cell %s failed: %s", cell, err)
        rows.append(row)
        info.append((cell, ms, err))
    return rows, info


__all__ = ["BASELINES", "Cell", "cells", "run_cell", "run_sweep"]
