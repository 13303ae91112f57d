import pytest

from sfsim.crypto.backend import available_backends
from sfsim.framing import load_phy_table
from sfsim.protocol import EpochSchedule, PhaseSpec


@pytest.fixture(params=[b.NAME for b in available_backends()])
def ccm_backend(request):
    for b in available_backends():
        if b.NAME == request.param:
            return b
    raise RuntimeError(request.param)


@pytest.fixture(scope="session")
def phys():
    return load_phy_table()


def make_schedule(
    payload=20,
    ind_hops=8,
    data_hops=10,
    slot_count=3,
    initiator=0,
    pattern="p2mp",
    initiators=None,
    target=None,
    epoch_ms=500,
):
    return EpochSchedule(
        epoch_interval_ns=epoch_ms * 1_000_000,
        phases=(
            PhaseSpec(
                "p2mp", (initiator,), payload_len=0, max_hops=ind_hops,
                slot_count=slot_count, is_ind=True,
            ),
            PhaseSpec(
                pattern,
                tuple(initiators) if initiators else (initiator,),
                payload_len=payload,
                max_hops=data_hops,
                slot_count=slot_count,
                target=target,
            ),
        ),
    )
