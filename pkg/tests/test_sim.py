"""Simulator physics: CT coherence, link/BER draws, clocks, timelines."""

from fractions import Fraction

import pytest

from conftest import make_schedule
from sfsim.framing import encode_frame
from sfsim.protocol import PhaseSpec
from sfsim.sim import (
    AUTH_FAIL,
    COLLISION_GARBLE,
    CRC_FAIL,
    CT_INCOHERENT,
    ERASED,
    LENGTH_OVERRUN,
    RECEIVED,
    ClockModel,
    Engine,
    EpochOverrun,
    EventQueue,
    RunConfig,
    SimEvent,
    Topology,
    TxInject,
    TxSignal,
    advance_clock,
    resolve_reception,
    schedule_phase_timeline,
)

FRAME = encode_frame(bytes(range(20)), b"\x01\x02\x03\x04")

RAW = 10**9  # offset units per nanosecond


def sig(node, p, offset_ns=0, data=FRAME):
    return TxSignal(node, data, offset_ns * RAW, p)


def rx(txs, *, ber=0.0, key=(0, 1, 0), receiver=5, seed=1, **kw):
    return resolve_reception(receiver, txs, None, ber=ber, seed=seed, draw_key=key, **kw)


# --- reception resolution -------------------------------------------------------


def test_single_lossless_transmitter():
    outcome, data = rx([sig(1, 1.0)])
    assert outcome.result == RECEIVED
    assert data == FRAME


def test_ct_coherent_below_boundary():
    outcome, _ = rx([sig(1, 1.0, 0), sig(2, 1.0, 400)])
    assert outcome.result == RECEIVED


def test_ct_incoherent_at_boundary():
    # the coherence rule is a step function at exactly 0.5 us
    outcome, _ = rx([sig(1, 1.0, 0), sig(2, 1.0, 500)])
    assert outcome.result == CT_INCOHERENT
    outcome, _ = rx([sig(1, 1.0, 0), sig(2, 1.0, 499)])
    assert outcome.result == RECEIVED


def test_ct_incoherent_above_boundary():
    outcome, _ = rx([sig(1, 1.0, 0), sig(2, 1.0, 600)])
    assert outcome.result == CT_INCOHERENT


def test_fractional_boundary_is_exact():
    just_under = 499_999_999_999  # 499.999999999 ns in raw units
    txs = [TxSignal(1, FRAME, 0, 1.0), TxSignal(2, FRAME, just_under, 1.0)]
    assert rx(txs)[0].result == RECEIVED
    txs[1] = TxSignal(2, FRAME, 500 * RAW, 1.0)
    assert rx(txs)[0].result == CT_INCOHERENT


def test_ct_combined_probability_matches_closed_form():
    # two coherent transmitters at p=0.9: success probability 0.99
    hits = 0
    n = 100_000
    for r in range(n):
        outcome, _ = rx([sig(1, 0.9, 0), sig(2, 0.9, 400)], key=(0, 1, r))
    # draws are keyed by slot here to vary them
        if outcome.result == RECEIVED:
            hits += 1
    assert abs(hits / n - 0.99) < 1e-3


def test_differing_bytes_garble():
    other = encode_frame(bytes(range(1, 21)), b"\x01\x02\x03\x04")
    outcome, _ = rx([sig(1, 1.0), TxSignal(2, other, 0, 1.0)])
    assert outcome.result == COLLISION_GARBLE


def test_capture_rule():
    other = encode_frame(bytes(range(1, 21)), b"\x01\x02\x03\x04")
    txs = [sig(1, 1.0), TxSignal(2, other, 0, 0.2)]
    outcome, data = rx(txs, capture_margin=0.5)
    assert outcome.result == RECEIVED
    assert data == FRAME
    # margin not met: still garbled
    txs = [sig(1, 0.6), TxSignal(2, other, 0, 0.2)]
    outcome, _ = rx(txs, capture_margin=0.5)
    assert outcome.result == COLLISION_GARBLE


def test_erasure_and_ber_outcomes():
    erased = crc = overrun = 0
    for r in range(4_000):
        outcome, _ = rx([sig(1, 0.7)], ber=2e-3, key=(1, 1, r), max_packet_length=20)
        if outcome.result == ERASED:
            erased += 1
        elif outcome.result == CRC_FAIL:
            crc += 1
            assert outcome.bits_corrupted >= 1
        elif outcome.result == LENGTH_OVERRUN:
            overrun += 1
    assert erased > 1000  # ~30%
    assert crc > 300
    assert overrun > 0  # corrupted length headers do occur


def test_ber_monotone_per_draw():
    # common draws: raising BER never turns a loss into a success
    for r in range(2_000):
        ok_low = rx([sig(1, 1.0)], ber=1e-4, key=(2, 1, r))[0].result == RECEIVED
        ok_high = rx([sig(1, 1.0)], ber=1e-3, key=(2, 1, r))[0].result == RECEIVED
        assert ok_low or not ok_high


def test_no_transmitters_is_erased():
    outcome, data = rx([])
    assert outcome.result == ERASED and data is None


# --- clocks -------------------------------------------------------------------


def test_drift_boundary_value_exact():
    # 20 ppm for 25 ms is exactly 0.5 us
    clock = ClockModel(drift_ppm=Fraction(20))
    clock.resync(0)
    assert clock.drift_error_ns(25_000_000) == 500
    assert advance_clock(clock, 25_000_000) == 25_000_500


def test_zero_drift_is_offset_only():
    clock = ClockModel(drift_ppm=Fraction(0), offset_ns=Fraction(7))
    clock.resync(0, Fraction(7))
    assert advance_clock(clock, 123) == 130


def test_resync_resets_accumulation():
    clock = ClockModel(drift_ppm=Fraction(15))
    clock.resync(0)
    assert clock.drift_error_ns(1_000_000) > 0
    clock.resync(1_000_000)
    assert clock.drift_error_ns(1_000_000) == 0
    assert clock.offset_at(1_000_000) == 0


def test_fractional_drift_stays_exact():
    clock = ClockModel(drift_ppm=Fraction(125, 10))  # 12.5 ppm
    clock.resync(0)
    assert clock.drift_error_ns(40_000_000) == 500


# --- event queue and timeline ----------------------------------------------------


def test_event_queue_orders_by_time_then_priority():
    q = EventQueue()
    q.push(SimEvent(100, "tx_begin", 1))
    q.push(SimEvent(100, "ccm_ready", 1))
    q.push(SimEvent(50, "rx_window", 2))
    q.push(SimEvent(100, "slot_start", 3))
    kinds = [q.pop().kind for _ in range(4)]
    assert kinds == ["rx_window", "slot_start", "ccm_ready", "tx_begin"]


def test_timeline_slot_structure(phys):
    spec = PhaseSpec("p2mp", (0,), payload_len=1, max_hops=6, slot_count=3, is_ind=True)
    events = schedule_phase_timeline(spec, phys["phy_1m"], 0, frame_len_on_air=17)
    slots = [e for e in events if e.kind == "slot_start"]
    assert len(slots) == 6
    gaps = {slots[i + 1].t_ns - slots[i].t_ns for i in range(5)}
    assert len(gaps) == 1  # fixed hop duration
    # ccm_ready precedes tx_begin within every slot
    for s in range(6):
        per_slot = [e for e in events if e.info == (s,)]
        kinds = [e.kind for e in per_slot]
        assert kinds.index("ccm_ready") < kinds.index("tx_begin")


def test_timeline_overrun_rejected(phys):
    spec = PhaseSpec("p2mp", (0,), payload_len=200, max_hops=40, slot_count=3)
    with pytest.raises(EpochOverrun):
        schedule_phase_timeline(
            spec, phys["phy_125k"], 0, frame_len_on_air=210, deadline_ns=500_000_000
        )


def test_paper_scale_epoch_count():
    # 3000 s of 500 ms epochs is 6000 floods
    assert 3_000_000_000_000 // 500_000_000 == 6000


def test_engine_rejects_overfull_epoch(phys):
    topo = Topology.line(3, spacing_m=40)
    sched = make_schedule(payload=200, ind_hops=40, data_hops=40)
    with pytest.raises(EpochOverrun):
        Engine(RunConfig(topology=topo, phy=phys["phy_125k"], schedule=sched, epochs=1))


# --- engine behavior ---------------------------------------------------------------


def lossless_line(n=3):
    # adjacent-only connectivity at p=1
    topo = Topology.line(n, spacing_m=40)
    for i in range(n):
        for j in range(i + 1, n):
            topo.overrides[(i, j)] = {"any": 1.0 if j == i + 1 else 0.0}
    return topo


def test_zero_drift_lossless_per_zero_everywhere(phys):
    for phy in phys.values():
        for payload in (20, 200):
            cfg = RunConfig(
                topology=lossless_line(5),
                phy=phy,
                schedule=make_schedule(payload=payload, data_hops=10),
                epochs=5,
                encryption="on",
                seed=2,
            )
            res = Engine(cfg).run()
            assert all(res.per(n) == 0.0 for n in range(1, 5)), (phy.name, payload)


def test_three_node_line_relay_counter(phys):
    # A-B-C: A initiates, B relays at slot 1, C receives the rc=1 frame
    cfg = RunConfig(
        topology=lossless_line(3),
        phy=phys["phy_1m"],
        schedule=make_schedule(payload=20, data_hops=6, slot_count=3),
        epochs=1,
        encryption="on",
        seed=3,
        observers=(),
        collect_deliveries=True,
        full_crypto=True,
    )
    eng = Engine(cfg)
    res = eng.run()
    assert res.delivered[2] == 1
    # C's channel-hopping index at reception equals the frame relay counter
    assert res.outcome_hist[RECEIVED] >= 3


def test_rc_equals_slot_index(phys):
    # track the slot where the far node first authenticates
    seen = []
    orig = Engine._handle_authenticated

    def spy(self, st, nid, plan, epoch, pc, s, *a, **kw):
        if nid == 2 and pc == 1:
            seen.append(s)
        return orig(self, st, nid, plan, epoch, pc, s, *a, **kw)

    Engine._handle_authenticated = spy
    try:
        cfg = RunConfig(
            topology=lossless_line(3),
            phy=phys["phy_1m"],
            schedule=make_schedule(payload=20, data_hops=6),
            epochs=1,
            encryption="on",
            seed=3,
        )
        Engine(cfg).run()
    finally:
        Engine._handle_authenticated = orig
    assert seen and seen[0] == 1  # one relay hop after the slot-0 initiation


def test_tampered_relay_never_retransmits(phys):
    # B hears only a tampered copy; it must not relay, so C gets nothing
    topo = Topology.line(3, spacing_m=40)
    topo.overrides = {(0, 1): {"any": 0.0}, (0, 2): {"any": 0.0}, (1, 2): {"any": 1.0}}
    attacker = 9
    topo.positions[attacker] = (0.0, 40.0)
    topo.overrides[(1, attacker)] = {"any": 1.0}
    topo.overrides[(0, attacker)] = {"any": 0.0}
    topo.overrides[(2, attacker)] = {"any": 0.0}

    def tamper(engine, epoch, pc, slot, channel):
        if pc != 1 or slot != 0:
            return []
        frame = bytearray(encode_frame(bytes(22), b"\0\0\0\0"))
        frame[3] ^= 0x40
        return [TxInject(attacker, bytes(frame))]

    cfg = RunConfig(
        topology=topo,
        phy=phys["phy_1m"],
        schedule=make_schedule(payload=20, data_hops=8),
        epochs=1,
        encryption="on",
        seed=4,
        full_crypto=True,
        attacker_tx=tamper,
        listen_all_slots=True,
    )
    res = Engine(cfg).run()
    assert res.outcome_hist[AUTH_FAIL] >= 1
    assert res.delivered.get(1, 0) == 0
    assert res.delivered.get(2, 0) == 0


def test_p2p_non_target_relays_but_does_not_deliver(phys):
    cfg = RunConfig(
        topology=lossless_line(3),
        phy=phys["phy_1m"],
        schedule=make_schedule(payload=20, data_hops=6, pattern="p2p", target=1),
        epochs=2,
        encryption="on",
        seed=5,
        collect_deliveries=True,
    )
    res = Engine(cfg).run()
    assert res.delivered.get(1, 0) == 2  # target
    assert res.delivered.get(2, 0) == 0  # relay only
    assert res.expected.get(2, 0) == 0
    # C still heard the flood (it participated)
    assert any(d.node == 1 for d in res.deliveries)


def test_per_hop_resync_keeps_lossless_network_clean(phys):
    drift = {i: Fraction((-1) ** i * 20) for i in range(5)}
    cfg = RunConfig(
        topology=lossless_line(5),
        phy=phys["phy_1m"],
        schedule=make_schedule(payload=50, data_hops=10),
        epochs=20,
        encryption="on",
        seed=6,
        drift_ppm=drift,
        per_hop_resync=True,
    )
    res = Engine(cfg).run()
    assert all(res.per(n) == 0.0 for n in range(1, 5))
    assert res.outcome_hist[CT_INCOHERENT] == 0


def test_drift_failure_hop_index_exact(phys):
    # diamond: initiator A feeds relays B (no drift) and C (d ppm); observer
    # D hears B and C. With resync off, the first incoherent slot index is
    # ceil(0.5us / (d * hop * 1e-6)) exactly.
    d = 8  # ppm
    topo = Topology(
        {0: (0.0, 0.0), 1: (40.0, 0.0), 2: (0.0, 40.0), 3: (40.0, 40.0)},
        overrides={
            (0, 1): {"any": 1.0},
            (0, 2): {"any": 1.0},
            (1, 3): {"any": 1.0},
            (2, 3): {"any": 1.0},
            (0, 3): {"any": 0.0},
            (1, 2): {"any": 0.0},
        },
    )
    from sfsim.protocol import EpochSchedule

    sched = EpochSchedule(
        epoch_interval_ns=500_000_000,
        phases=(
            PhaseSpec("p2mp", (0,), payload_len=0, max_hops=200, slot_count=198, is_ind=True),
        ),
    )
    cfg = RunConfig(
        topology=topo,
        phy=phys["phy_1m"],
        schedule=sched,
        epochs=1,
        encryption="on",
        seed=7,
        drift_ppm={2: Fraction(d)},
        per_hop_resync=False,
        observers=(3,),
    )
    eng = Engine(cfg)
    res = eng.run()
    hop = eng.plans[0].hop_ns
    import math

    expected_k = math.ceil(Fraction(500) / (Fraction(d) * hop / 1_000_000))
    incoherent = [o.slot for o in res.observations if o.result == CT_INCOHERENT]
    received = [o.slot for o in res.observations if o.result == RECEIVED]
    assert incoherent and min(incoherent) == expected_k
    assert all(s < expected_k for s in received if s > 0)


def test_event_log_and_results_deterministic(phys):
    def run():
        cfg = RunConfig(
            topology=Topology.line(6, spacing_m=45),
            phy=phys["phy_2m"],
            schedule=make_schedule(payload=50, data_hops=12),
            epochs=10,
            encryption="on",
            seed=42,
            ber=1e-4,
            collect_events=True,
        )
        return Engine(cfg).run()

    a, b = run(), run()
    assert a.event_log == b.event_log
    assert a.delivered == b.delivered
    assert a.outcome_hist == b.outcome_hist


def test_ber_monotone_per_node_with_crn(phys):
    def run(ber):
        cfg = RunConfig(
            topology=lossless_line(6),
            phy=phys["phy_1m"],
            schedule=make_schedule(payload=100, data_hops=12),
            epochs=30,
            encryption="on",
            seed=8,
            ber=ber,
        )
        return Engine(cfg).run()

    base = run(0.0)
    low = run(1e-4)
    high = run(1e-3)
    for n in range(1, 6):
        assert base.per(n) <= low.per(n) <= high.per(n)


def test_length_overrun_does_not_shift_schedule(phys):
    # corrupted-length receptions occur, yet slot timing stays identical to
    # the clean run's
    def run(ber):
        cfg = RunConfig(
            topology=lossless_line(3),
            phy=phys["phy_1m"],
            schedule=make_schedule(payload=100, data_hops=6),
            epochs=40,
            encryption="on",
            seed=9,
            ber=ber,
            collect_events=True,
        )
        return Engine(cfg).run()

    noisy = run(5e-3)
    assert noisy.outcome_hist[LENGTH_OVERRUN] > 0
    # every slot that fired sits exactly on the static grid: a corrupted
    # length header never moves a subsequent slot boundary
    cfg = RunConfig(
        topology=lossless_line(3),
        phy=phys["phy_1m"],
        schedule=make_schedule(payload=100, data_hops=6),
        epochs=40,
        encryption="on",
        seed=9,
    )
    plans = Engine(cfg).plans
    epoch_ns = cfg.schedule.epoch_interval_ns
    for line in noisy.event_log:
        t, _, kind, info = line.split(",")
        if kind != "slot_start":
            continue
        pc, s = (int(x) for x in info.split(":"))
        epoch = int(t) // epoch_ns
        expect = epoch * epoch_ns + plans[pc].start_ns + s * plans[pc].hop_ns
        assert int(t) == expect


def test_software_ccm_latency_blocks_slots(phys):
    cfg = RunConfig(
        topology=lossless_line(3),
        phy=phys["phy_1m"],
        schedule=make_schedule(payload=20, data_hops=6),
        epochs=2,
        encryption="on",
        seed=10,
        keystream_prep_ns=1_556_000,  # software CCM cannot make the ramp-up
    )
    res = Engine(cfg).run()
    assert res.ccm_late_slots > 0
    assert res.delivered.get(1, 0) == 0


def test_mp2p_without_device_keys_flags_shared_iv(phys):
    topo = lossless_line(4)
    cfg = RunConfig(
        topology=topo,
        phy=phys["phy_1m"],
        schedule=make_schedule(
            payload=20, data_hops=8, pattern="mp2p", initiators=(1, 3), target=0
        ),
        epochs=2,
        encryption="on",
        seed=11,
    )
    res = Engine(cfg).run()
    assert res.ledger_violations == 0
    assert "mp2p_shared_iv" in res.ledger_event_classes


def test_mp2p_single_initiator_no_reuse(phys):
    cfg = RunConfig(
        topology=lossless_line(4),
        phy=phys["phy_1m"],
        schedule=make_schedule(
            payload=20, data_hops=8, pattern="mp2p", initiators=(1,), target=0
        ),
        epochs=2,
        encryption="on",
        seed=12,
    )
    res = Engine(cfg).run()
    assert res.ledger_violations == 0
    assert "mp2p_shared_iv" not in res.ledger_event_classes


def test_unjoined_node_joins_within_guaranteed_period(phys):
    from sfsim.protocol import GUARANTEED_PERIOD

    for start_epoch in range(1, 5):
        cfg = RunConfig(
            topology=lossless_line(3),
            phy=phys["phy_1m"],
            schedule=make_schedule(payload=20, data_hops=8),
            epochs=start_epoch + GUARANTEED_PERIOD + 1,
            encryption="on",
            seed=13,
            joins=((2, start_epoch),),
        )
        res = Engine(cfg).run()
        assert 2 in res.join_epochs
        assert res.join_epochs[2] - start_epoch < GUARANTEED_PERIOD


def test_desync_and_rejoin(phys):
    # node 2 loses its link for a while: after 3 missed INDs it reverts to
    # camping and joins back once the link returns
    topo = lossless_line(3)

    class FlakyTopo(Topology):
        pass

    cfg = RunConfig(
        topology=topo,
        phy=phys["phy_1m"],
        schedule=make_schedule(payload=20, data_hops=8),
        epochs=12,
        encryption="on",
        seed=14,
        restarts=tuple((1, e) for e in range(2, 7)),  # relay down: node 2 isolated
        desync_limit=3,
    )
    eng = Engine(cfg)
    res = eng.run()
    assert 2 in res.join_epochs  # desynced then re-joined
    assert eng.nodes[2].sync_status == "joined"


def test_ec_adoption_increments_by_one(phys):
    cfg = RunConfig(
        topology=lossless_line(2),
        phy=phys["phy_1m"],
        schedule=make_schedule(payload=20, data_hops=6),
        epochs=3,
        encryption="on",
        seed=15,
    )
    eng = Engine(cfg)
    ecs = []
    orig = Engine._run_epoch

    def spy(self, epoch):
        orig(self, epoch)
        ecs.append(self.nodes[1].ec)

    Engine._run_epoch = spy
    try:
        eng.run()
    finally:
        Engine._run_epoch = orig
    assert ecs == [0, 1, 2]


def test_initiator_restart_ec_monotone(phys):
    cfg = RunConfig(
        topology=lossless_line(2),
        phy=phys["phy_1m"],
        schedule=make_schedule(payload=20, data_hops=6),
        epochs=6,
        encryption="on",
        seed=16,
        restarts=((0, 2),),
    )
    eng = Engine(cfg)
    res = eng.run()
    assert res.ledger_violations == 0
    assert eng.nodes[0].ec >= 4  # never rolled back


def test_topology_invariants(phys):
    topo = Topology.line(10, spacing_m=30)
    ordered = ["phy_125k", "phy_500k", "phy_1m", "phy_2m"]
    for a in range(10):
        for b in range(a + 1, 10):
            ps = [topo.p_link(a, b, phys[n]) for n in ordered]
            assert ps == sorted(ps, reverse=True)  # higher bitrate never helps
            assert topo.p_link(a, b, phys["phy_1m"]) == topo.p_link(b, a, phys["phy_1m"])
    # non-increasing with distance
    for n in ordered:
        ps = [topo.p_link(0, b, phys[n]) for b in range(1, 10)]
        assert ps == sorted(ps, reverse=True)


def test_hops_from_source(phys):
    topo = lossless_line(5)
    hops = topo.hops_from(0, phys["phy_1m"])
    assert hops == {0: 0, 1: 1, 2: 2, 3: 3, 4: 4}
