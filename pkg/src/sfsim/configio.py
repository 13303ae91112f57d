"""Config-file ingestion: experiment configs, topologies, attack scenarios.

All files are YAML.  Validation happens here so the CLI can reject a bad
config (exit code 1) before any simulation starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import yaml

from ._rng import P_DRIFT, mix64
from .framing import Phy, load_phy_table
from .protocol import ConfigError, EpochSchedule, PhaseSpec
from .sim import BER_FACTORS, Topology

ENCRYPTION_MODES = ("off", "on", "on+device_keys")
DEFAULT_PAYLOADS = (20, 50, 100, 200)
DEFAULT_PHYS = ("phy_125k", "phy_500k", "phy_1m", "phy_2m")


@dataclass
class SimKnobs:
    hop_gap_us: int = 150
    rampup_us: int = 40
    keystream_prep_us: int | None = None
    timing_error_us: int = 0
    per_hop_resync: bool = True
    capture_margin: float | None = None
    desync_limit: int = 3


@dataclass
class ExperimentConfig:
    topology_spec: dict
    phy_names: tuple[str, ...] = DEFAULT_PHYS
    payload_sizes: tuple[int, ...] = DEFAULT_PAYLOADS
    epoch_interval_ms: int = 500
    duration_s: int = 300
    repeats: int = 10
    encryption_modes: tuple[str, ...] = ("off", "on")
    seed: int = 1
    ber_base: float = 0.0
    ber_factors: dict = field(default_factory=lambda: dict(BER_FACTORS))
    drift_mode: str = "zero"  # zero | uniform
    drift_max_ppm: int = 20
    sim: SimKnobs = field(default_factory=SimKnobs)
    ind_max_hops: int = 24
    data_max_hops: int = 24
    slot_count: int = 3
    initiator: int = 0
    phy_table_path: str | None = None

    @property
    def epochs(self) -> int:
        interval_ns = self.epoch_interval_ms * 1_000_000
        total_ns = self.duration_s * 1_000_000_000
        if total_ns % interval_ns:
            raise ConfigError("duration must be an integral number of epochs")
        return total_ns // interval_ns

    def validate(self):
        table = load_phy_table(self.phy_table_path)
        for name in self.phy_names:
            if name not in table:
                raise ConfigError(f"unknown PHY {name!r}")
        for mode in self.encryption_modes:
            if mode not in ENCRYPTION_MODES:
                raise ConfigError(f"unknown encryption mode {mode!r}")
        for p in self.payload_sizes:
            if not 0 <= p <= 247:
                raise ConfigError("payload size must leave room for the protocol header")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        _ = self.epochs
        topo = self.build_topology()
        if self.initiator not in topo.positions:
            raise ConfigError(f"initiator {self.initiator} not in topology")

    def build_topology(self) -> Topology:
        spec = self.topology_spec
        if "file" in spec:
            return load_topology(spec["file"])
        return Topology.from_spec(spec)

    def phys(self) -> dict[str, Phy]:
        table = load_phy_table(self.phy_table_path)
        return {n: table[n] for n in self.phy_names}

    def ber_for(self, phy_name: str) -> float:
        return self.ber_base * self.ber_factors.get(phy_name, 1.0)

    def drift_for(self, topology: Topology, repeat_seed: int) -> dict[int, Fraction]:
        if self.drift_mode == "zero":
            return {}
        if self.drift_mode != "uniform":
            raise ConfigError(f"unknown drift mode {self.drift_mode!r}")
        out = {}
        span = 2 * self.drift_max_ppm * 1000 + 1  # milli-ppm resolution
        for nid in topology.node_ids():
            mppm = mix64(repeat_seed, P_DRIFT, nid) % span - self.drift_max_ppm * 1000
            out[nid] = Fraction(mppm, 1000)
        return out

    def schedule_for(self, payload: int) -> EpochSchedule:
        return EpochSchedule(
            epoch_interval_ns=self.epoch_interval_ms * 1_000_000,
            phases=(
                PhaseSpec(
                    "p2mp",
                    (self.initiator,),
                    payload_len=0,
                    max_hops=self.ind_max_hops,
                    slot_count=self.slot_count,
                    is_ind=True,
                ),
                PhaseSpec(
                    "p2mp",
                    (self.initiator,),
                    payload_len=payload,
                    max_hops=self.data_max_hops,
                    slot_count=self.slot_count,
                ),
            ),
        )


def _require(d: dict, key: str, ctx: str):
    if key not in d:
        raise ConfigError(f"missing {key!r} in {ctx}")
    return d[key]


def _enc_mode(value) -> str:
    # YAML 1.1 reads bare off/on as booleans
    if value is False:
        return "off"
    if value is True:
        return "on"
    return str(value)


def parse_experiment_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    topo = _require(doc, "topology", "config")
    sim_doc = doc.get("sim", {}) or {}
    knobs = SimKnobs(
        hop_gap_us=int(sim_doc.get("hop_gap_us", 150)),
        rampup_us=int(sim_doc.get("rampup_us", 40)),
        keystream_prep_us=(
            int(sim_doc["keystream_prep_us"]) if "keystream_prep_us" in sim_doc else None
        ),
        timing_error_us=int(sim_doc.get("timing_error_us", 0)),
        per_hop_resync=bool(sim_doc.get("per_hop_resync", True)),
        capture_margin=(
            float(sim_doc["capture_margin"]) if sim_doc.get("capture_margin") is not None else None
        ),
        desync_limit=int(sim_doc.get("desync_limit", 3)),
    )
    ber_doc = doc.get("ber", {}) or {}
    drift_doc = doc.get("drift", {}) or {}
    sched_doc = doc.get("schedule", {}) or {}
    cfg = ExperimentConfig(
        topology_spec=topo,
        phy_names=tuple(doc.get("phy", DEFAULT_PHYS)),
        payload_sizes=tuple(int(p) for p in doc.get("payload_sizes", DEFAULT_PAYLOADS)),
        epoch_interval_ms=int(doc.get("epoch_interval_ms", 500)),
        duration_s=int(doc.get("duration_s", 300)),
        repeats=int(doc.get("repeats", 10)),
        encryption_modes=tuple(_enc_mode(m) for m in doc.get("encryption", ["off", "on"])),
        seed=int(doc.get("seed", 1)),
        ber_base=float(ber_doc.get("base", 0.0)),
        ber_factors={**BER_FACTORS, **{k: float(v) for k, v in ber_doc.get("factors", {}).items()}},
        drift_mode=str(drift_doc.get("mode", "zero")),
        drift_max_ppm=int(drift_doc.get("max_ppm", 20)),
        sim=knobs,
        ind_max_hops=int(sched_doc.get("ind_max_hops", 24)),
        data_max_hops=int(sched_doc.get("data_max_hops", 24)),
        slot_count=int(sched_doc.get("slot_count", 3)),
        initiator=int(sched_doc.get("initiator", 0)),
        phy_table_path=doc.get("phy_table"),
    )
    cfg.validate()
    return cfg


def load_experiment_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"bad YAML in {path}: {e}")
    return parse_experiment_config(doc)


def load_topology(path: str) -> Topology:
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"topology file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"bad YAML in {path}: {e}")
    return Topology.from_spec(doc)


def load_scenarios(path: str) -> list[dict]:
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"bad YAML in {path}: {e}")
    if isinstance(doc, dict) and "scenarios" in doc:
        doc = doc["scenarios"]
    if not isinstance(doc, list):
        raise ConfigError("scenario file must hold a scenario list")
    return doc
