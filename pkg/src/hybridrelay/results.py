"""Result rows and their CSV form."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

HEADER = ("scheme", "p_t_dbm", "L_e_db", "N", "seed", "episode", "reward_mean", "reward_std",
          "runtime_ms", "modes")


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    p_t_dbm: float
    L_e_db: float
    N: int
    seed: int
    episode: int
    reward_mean: float
    reward_std: float
    runtime_ms: float
    modes: str  # little-endian bitstring, "" when no relay takes part

    @property
    def active_count(self) -> int:
        return self.modes.count("0")


def modes_to_bits(modes) -> str:
    return "".join(str(int(b)) for b in modes)


def bitmask_to_bits(mask: int, n: int) -> str:
    return "".join(str((mask >> k) & 1) for k in range(n))


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6g}"


def emit_csv(rows, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADER)
            for r in rows:
                w.writerow([r.scheme, _fmt(r.p_t_dbm), _fmt(r.L_e_db), r.N, r.seed, r.episode,
                            _fmt(r.reward_mean), _fmt(r.reward_std), _fmt(r.runtime_ms), r.modes])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path) -> list[ResultRow]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rd = csv.reader(fh)
        head = tuple(next(rd))
        if head != HEADER:
            raise ValueError(f"unexpected header {head}")
        return [ResultRow(s, float(p), float(le), int(n), int(seed), int(ep), float(m), float(sd),
                          float(rt), modes)
                for s, p, le, n, seed, ep, m, sd, rt, modes in rd]
