"""Tile-count sweep: feasibility against a platform, optimum and Pareto front."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .config import ModelConfig, PlatformConfig, TileConfig, validate_model
from .perfmodel import Mode, PipelineConstants, cycles_to_ms, model_latency
from .resources import ResourceEstimate, estimate_resources

DEFAULT_MHA_TILES = tuple(range(6, 49))
DEFAULT_FFN_TILES = tuple(range(2, 7))

CSV_COLUMNS = ("tiles_mha", "tiles_ffn", "dsps", "bram18k", "cycles", "freq_mhz",
               "latency_ms", "feasible", "pareto")


class EmptyCandidates(ValueError):
    pass


class NoFeasiblePoint(RuntimeError):
    pass


@dataclass
class DsePoint:
    tiles_mha: int
    tiles_ffn: int
    resources: ResourceEstimate
    cycles: float
    freq_mhz: float
    latency_ms: float
    feasible: bool
    analytical_only: bool = False  # candidate does not divide the model dimensions
    dominated: bool = False

    @property
    def key(self) -> tuple[int, int]:
        return (self.tiles_mha, self.tiles_ffn)

    def to_json_dict(self) -> dict:
        return {"tiles_mha": self.tiles_mha, "tiles_ffn": self.tiles_ffn,
                "dsps": self.resources.dsps, "bram18k": self.resources.bram18k,
                "cycles": self.cycles, "freq_mhz": self.freq_mhz, "latency_ms": self.latency_ms,
                "feasible": self.feasible, "analytical_only": self.analytical_only,
                "dominated": self.dominated}


def _evaluate(cfg, platform, tm, tf, freq, base_tiles, k, mode, bitw) -> DsePoint:
    tiles = replace(base_tiles, tiles_mha=tm, tiles_ffn=tf, ts_mha=None)
    exact = validate_model(cfg, tiles, exact_tiling=True).ok
    res = estimate_resources(cfg, tiles, bitw, platform)
    lat = model_latency(cfg, tiles, k, mode, freq)
    feasible = res.dsps <= platform.dsp_budget and res.bram18k <= platform.bram18k_budget
    return DsePoint(tm, tf, res, lat.total_cycles, freq, cycles_to_ms(lat.total_cycles, freq),
                    feasible, analytical_only=not exact)


def enumerate_points(cfg: ModelConfig, platform: PlatformConfig,
                     mha_candidates=DEFAULT_MHA_TILES, ffn_candidates=DEFAULT_FFN_TILES,
                     freq_table: dict[tuple[int, int], float] | None = None,
                     k: PipelineConstants = PipelineConstants(), mode: Mode | str = Mode.OVERLAPPED,
                     bitw: int = 16, workers: int = 1, base_tiles: TileConfig | None = None
                     ) -> list[DsePoint]:
    mha = sorted(set(mha_candidates))
    ffn = sorted(set(ffn_candidates))
    if not mha or not ffn:
        raise EmptyCandidates("both MHA and FFN candidate lists must be non-empty")
    if min(mha) < 1 or min(ffn) < 1:
        raise ValueError("tile counts must be >= 1")
    if base_tiles is None:
        base_tiles = TileConfig(max_d_model=max(cfg.d_model, 768), max_seq_len=max(cfg.seq_len, 128),
                                max_heads=max(cfg.heads, 16), max_d_hidden=max(cfg.d_hidden, 3072),
                                max_layers=max(cfg.n_layers, 12))
    freq_table = freq_table or {}
    grid = [(tm, tf) for tm in mha for tf in ffn]

    def run(key):
        tm, tf = key
        return _evaluate(cfg, platform, tm, tf, freq_table.get(key, platform.freq_mhz),
                         base_tiles, k, mode, bitw)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            points = list(pool.map(run, grid))
    else:
        points = [run(g) for g in grid]
    points.sort(key=lambda p: p.key)
    front = {p.key for p in pareto(points)}
    for p in points:
        p.dominated = p.feasible and p.key not in front
    return points


def _rank(p: DsePoint):
    return (p.latency_ms, p.resources.dsps, p.resources.bram18k, p.tiles_mha, p.tiles_ffn)


def select_optimum(points) -> DsePoint:
    feasible = [p for p in points if p.feasible]
    if not feasible:
        raise NoFeasiblePoint("no candidate fits the platform budgets")
    return min(feasible, key=_rank)


def _dominates(a: DsePoint, b: DsePoint) -> bool:
    la, da = a.latency_ms, a.resources.dsps
    lb, db = b.latency_ms, b.resources.dsps
    return la <= lb and da <= db and (la < lb or da < db)


def pareto(points) -> list[DsePoint]:
    """Non-dominated feasible points under (latency, DSPs), ordered by latency."""
    feasible = sorted((p for p in points if p.feasible), key=_rank)
    front: list[DsePoint] = []
    best_dsps = float("inf")
    last = None
    for p in feasible:
        cur = (p.latency_ms, p.resources.dsps)
        if cur == last:  # duplicates of a front point are not dominated by it
            front.append(p)
        elif p.resources.dsps < best_dsps:
            front.append(p)
            best_dsps = p.resources.dsps
            last = cur
    return front


def to_csv(points) -> str:
    front = {p.key for p in pareto(points)}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow([p.tiles_mha, p.tiles_ffn, repr(float(p.resources.dsps)),
                    repr(float(p.resources.bram18k)), repr(float(p.cycles)), repr(float(p.freq_mhz)),
                    repr(float(p.latency_ms)), int(p.feasible), int(p.key in front)])
    return buf.getvalue()


def read_freq_table(text: str) -> dict[tuple[int, int], float]:
    """CSV with columns tiles_mha, tiles_ffn, freq_mhz."""
    rows = csv.DictReader(io.StringIO(text))
    missing = {"tiles_mha", "tiles_ffn", "freq_mhz"} - set(rows.fieldnames or ())
    if missing:
        raise ValueError(f"frequency table is missing columns {sorted(missing)}")
    table = {}
    for r in rows:
        f = float(r["freq_mhz"])
        if f <= 0:
            raise ValueError("frequencies must be > 0")
        table[(int(r["tiles_mha"]), int(r["tiles_ffn"]))] = f
    return table
