"""Batch experiment runner: PER matrix, CSV/JSON persistence, comparisons.

One run per (PHY, payload, encryption, repeat) cell.  Matched cells share
the repeat's seed, so unencrypted/encrypted pairs (and different PHYs or
payload sizes) are coupled through common random numbers and their deltas
are low-variance.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import quantiles

from . import __version__
from ._rng import mix64
from .configio import ExperimentConfig
from .protocol import ConfigError
from .sim import Engine, RunConfig

CSV_COLUMNS = [
    "run_id",
    "seed",
    "phy",
    "payload_bytes",
    "encryption",
    "node_id",
    "hops_from_source",
    "packets_expected",
    "packets_delivered",
    "per",
]


class MissingPair(Exception):
    """A compared cell has no counterpart in the other result set."""


@dataclass(frozen=True)
class Cell:
    phy_name: str
    payload: int
    encryption: str
    repeat: int

    @property
    def run_id(self) -> str:
        return f"{self.phy_name}-p{self.payload}-{self.encryption}-r{self.repeat}"


def matrix_cells(cfg: ExperimentConfig) -> list[Cell]:
    cells = []
    for phy_name in cfg.phy_names:
        for payload in cfg.payload_sizes:
            for enc in cfg.encryption_modes:
                for rep in range(cfg.repeats):
                    cells.append(Cell(phy_name, payload, enc, rep))
    return cells


def repeat_seed(master_seed: int, repeat: int) -> int:
    return mix64(master_seed, 0x5EED, repeat)


def build_run_config(cfg: ExperimentConfig, cell: Cell) -> RunConfig:
    topo = cfg.build_topology()
    phy = cfg.phys()[cell.phy_name]
    seed = repeat_seed(cfg.seed, cell.repeat)
    return RunConfig(
        topology=topo,
        phy=phy,
        schedule=cfg.schedule_for(cell.payload),
        epochs=cfg.epochs,
        encryption=cell.encryption,
        seed=seed,
        ber=cfg.ber_for(cell.phy_name),
        hop_gap_ns=cfg.sim.hop_gap_us * 1000,
        rampup_ns=cfg.sim.rampup_us * 1000,
        keystream_prep_ns=(
            cfg.sim.keystream_prep_us * 1000 if cfg.sim.keystream_prep_us is not None else None
        ),
        timing_error_ns=cfg.sim.timing_error_us * 1000,
        per_hop_resync=cfg.sim.per_hop_resync,
        drift_ppm=cfg.drift_for(topo, seed),
        capture_margin=cfg.sim.capture_margin,
        desync_limit=cfg.sim.desync_limit,
    )


def _run_cell(args) -> tuple[str, list[dict], dict]:
    cfg, cell = args
    rc = build_run_config(cfg, cell)
    result = Engine(rc).run()
    hops = rc.topology.hops_from(cfg.initiator, rc.phy)
    rows = []
    for nid in rc.topology.node_ids():
        expected = result.expected.get(nid, 0)
        delivered = result.delivered.get(nid, 0)
        rows.append(
            {
                "run_id": cell.run_id,
                "seed": rc.seed,
                "phy": cell.phy_name,
                "payload_bytes": cell.payload,
                "encryption": cell.encryption,
                "node_id": nid,
                "hops_from_source": hops.get(nid, -1),
                "packets_expected": expected,
                "packets_delivered": delivered,
                "per": result.per(nid),
            }
        )
    pers = [r["per"] for r in rows if r["packets_expected"] > 0]
    agg = {
        "per_quartiles": quantiles(pers, n=4) if len(pers) >= 2 else pers,
        "outcomes": dict(sorted(result.outcome_hist.items())),
        "ledger": {
            "violations": result.ledger_violations,
            "reuse_events": dict(sorted(result.ledger_event_counts.items())),
        },
    }
    return cell.run_id, rows, agg


def run_experiment(cfg: ExperimentConfig, jobs: int = 1):
    """Run the full matrix; returns (rows, per-run aggregates)."""
    cells = matrix_cells(cfg)
    work = [(cfg, c) for c in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_cell, work))
    else:
        outputs = [_run_cell(w) for w in work]
    outputs.sort(key=lambda t: t[0])
    rows = []
    aggregates = {}
    for run_id, cell_rows, agg in outputs:
        rows.extend(cell_rows)
        aggregates[run_id] = agg
    return rows, aggregates


def export_results(rows, aggregates, cfg: ExperimentConfig, out_dir: str) -> tuple[str, str]:
    """Write results.csv and manifest.json; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    r["run_id"],
                    r["seed"],
                    r["phy"],
                    r["payload_bytes"],
                    r["encryption"],
                    r["node_id"],
                    r["hops_from_source"],
                    r["packets_expected"],
                    r["packets_delivered"],
                    f"{r['per']:.9f}",
                ]
            )
    manifest = {
        "engine_version": __version__,
        "wall_clock_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": {
            "topology": cfg.topology_spec,
            "phy": list(cfg.phy_names),
            "payload_sizes": list(cfg.payload_sizes),
            "epoch_interval_ms": cfg.epoch_interval_ms,
            "duration_s": cfg.duration_s,
            "repeats": cfg.repeats,
            "encryption": list(cfg.encryption_modes),
            "seed": cfg.seed,
            "epochs": cfg.epochs,
            "ber": {"base": cfg.ber_base, "factors": cfg.ber_factors},
            "drift": {"mode": cfg.drift_mode, "max_ppm": cfg.drift_max_ppm},
            "sim": vars(cfg.sim),
            "schedule": {
                "ind_max_hops": cfg.ind_max_hops,
                "data_max_hops": cfg.data_max_hops,
                "slot_count": cfg.slot_count,
                "initiator": cfg.initiator,
            },
        },
        "runs": aggregates,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, manifest_path


def load_results(result_dir: str):
    csv_path = os.path.join(result_dir, "results.csv")
    manifest_path = os.path.join(result_dir, "manifest.json")
    if not os.path.exists(csv_path):
        raise ConfigError(f"no results.csv under {result_dir}")
    with open(csv_path, newline="") as f:
        rows = list(csv.DictReader(f))
    manifest = None
    if os.path.exists(manifest_path):
        with open(manifest_path) as f:
            manifest = json.load(f)
    return rows, manifest


def analytic_overhead_delta(ber: float, payload_bytes: int) -> float:
    """Closed-form PER penalty of the 5 security bytes under the bit-error
    model: (1-BER)^(8L) - (1-BER)^(8(L+5))."""
    return (1.0 - ber) ** (8 * payload_bytes) - (1.0 - ber) ** (8 * (payload_bytes + 5))


def compare_encrypted_delta(unenc_dir: str, enc_dir: str):
    """Per-cell PER delta between matched unencrypted/encrypted results.

    Cells match on (phy, payload, repeat); both sides must exist and must
    have been produced with shared seeds (the runner guarantees this).
    """
    rows_u, manifest_u = load_results(unenc_dir)
    rows_e, _ = load_results(enc_dir)

    def cell_map(rows, want_enc: bool):
        cells = {}
        for r in rows:
            enc = r["encryption"] != "off"
            if enc != want_enc:
                continue
            rep = r["run_id"].rsplit("-r", 1)[1]
            key = (r["phy"], int(r["payload_bytes"]), int(rep))
            cells.setdefault(key, []).append(r)
        return cells

    cu = cell_map(rows_u, False)
    ce = cell_map(rows_e, True)
    ber_base = 0.0
    ber_factors = {}
    if manifest_u:
        ber_base = manifest_u["config"]["ber"]["base"]
        ber_factors = manifest_u["config"]["ber"]["factors"]

    report = []
    for key in sorted(cu):
        if key not in ce:
            raise MissingPair(f"no encrypted counterpart for cell {key}")
        phy_name, payload, rep = key
        seeds_u = {r["seed"] for r in cu[key]}
        seeds_e = {r["seed"] for r in ce[key]}
        if seeds_u != seeds_e:
            raise MissingPair(f"cell {key} was not run with shared seeds")

        def mean_per(rows):
            vals = [float(r["per"]) for r in rows if int(r["packets_expected"]) > 0]
            return sum(vals) / len(vals) if vals else 0.0

        ber = ber_base * ber_factors.get(phy_name, 1.0)
        report.append(
            {
                "phy": phy_name,
                "payload_bytes": payload,
                "repeat": rep,
                "per_unencrypted": mean_per(cu[key]),
                "per_encrypted": mean_per(ce[key]),
                "delta": mean_per(ce[key]) - mean_per(cu[key]),
                "analytic_delta": analytic_overhead_delta(ber, payload),
            }
        )
    for key in sorted(ce):
        if key not in cu:
            raise MissingPair(f"no unencrypted counterpart for cell {key}")
    return report


def write_delta_report(report, path: str):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(
            f,
            fieldnames=[
                "phy",
                "payload_bytes",
                "repeat",
                "per_unencrypted",
                "per_encrypted",
                "delta",
                "analytic_delta",
            ],
        )
        w.writeheader()
        for r in report:
            w.writerow(
                {
                    **r,
                    "per_unencrypted": f"{r['per_unencrypted']:.9f}",
                    "per_encrypted": f"{r['per_encrypted']:.9f}",
                    "delta": f"{r['delta']:.9f}",
                    "analytic_delta": f"{r['analytic_delta']:.9f}",
                }
            )
