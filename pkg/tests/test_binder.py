import random

import pytest
from hypothesis import given, settings, strategies as st

from vcellsim.binder import Binder, Direction, NodeKind
from vcellsim.errors import LedgerError, RegistryError


def _binder_with_cells(n=2, num_rbs=50):
    binder = Binder(num_rbs=num_rbs)
    cells = [
        binder.register_node(NodeKind.ENB, f"enb{i}", 46.0, (1000.0 * i, 0.0)).node_id
        for i in range(n)
    ]
    return binder, cells


# ----------------------------------------------------------------------
# registration


def test_first_registration_gets_id_and_address_one():
    binder = Binder()
    rec = binder.register_node(NodeKind.ENB, "enb0", 46.0)
    assert rec.node_id == 1
    assert rec.address == 1


def test_ids_are_never_reused():
    binder = Binder()
    binder.register_node(NodeKind.UE, "a", 26.0)
    second = binder.register_node(NodeKind.UE, "b", 26.0)
    binder.deregister_node(second.node_id)
    third = binder.register_node(NodeKind.UE, "c", 26.0)
    assert third.node_id == 3
    assert third.address == 3


def test_two_enbs_and_ten_vehicles_make_twelve_live_records():
    binder, _ = _binder_with_cells(2)
    for i in range(10):
        binder.register_node(NodeKind.UE, f"car{i}", 26.0)
    assert len(binder.live_nodes()) == 12


def test_duplicate_live_name_rejected():
    binder = Binder()
    binder.register_node(NodeKind.UE, "car0", 26.0)
    with pytest.raises(RegistryError):
        binder.register_node(NodeKind.UE, "car0", 26.0)


def test_name_reusable_after_deregistration():
    binder = Binder()
    rec = binder.register_node(NodeKind.UE, "car0", 26.0)
    binder.deregister_node(rec.node_id)
    again = binder.register_node(NodeKind.UE, "car0", 26.0)
    assert again.node_id == 2


def test_failed_registration_consumes_no_ids():
    binder = Binder()
    binder.register_node(NodeKind.UE, "car0", 26.0)
    with pytest.raises(RegistryError):
        binder.register_node(NodeKind.UE, "car0", 26.0)
    rec = binder.register_node(NodeKind.UE, "car1", 26.0)
    assert rec.node_id == 2  # no gap


# ----------------------------------------------------------------------
# deregistration


def test_deregister_sole_ue_leaves_only_cells():
    binder, cells = _binder_with_cells(2)
    binder.advance_tti(0)
    ue = binder.register_node(NodeKind.UE, "car0", 26.0).node_id
    binder.record_allocation(0, Direction.UL, cells[0], range(5), ue)
    binder.deregister_node(ue)
    assert [r.node_id for r in binder.live_nodes()] == cells
    assert binder.co_channel_transmitters(0, Direction.UL, 0, excluding_cell=cells[1]) == []


def test_deregister_purges_grid_like_a_rebuild():
    binder, cells = _binder_with_cells(2)
    binder.advance_tti(0)
    ue1 = binder.register_node(NodeKind.UE, "car0", 26.0).node_id
    ue2 = binder.register_node(NodeKind.UE, "car1", 26.0).node_id
    binder.record_allocation(0, Direction.UL, cells[0], range(10), ue1)
    binder.record_allocation(0, Direction.UL, cells[1], range(4, 12), ue2)

    binder.deregister_node(ue1)

    # oracle: rebuild the grid from scratch without the departed node
    oracle = Binder(num_rbs=50)
    ocells = [
        oracle.register_node(NodeKind.ENB, f"enb{i}", 46.0, (1000.0 * i, 0.0)).node_id
        for i in range(2)
    ]
    oracle.register_node(NodeKind.UE, "car0", 26.0)
    oue2 = oracle.register_node(NodeKind.UE, "car1", 26.0).node_id
    oracle.advance_tti(0)
    oracle.record_allocation(0, Direction.UL, ocells[1], range(4, 12), oue2)

    got = {(cell - cells[0], rb) for cell, rb, _ in binder.allocation_items(0, Direction.UL)}
    expected = {
        (cell - ocells[0], rb) for cell, rb, _ in oracle.allocation_items(0, Direction.UL)
    }
    assert got == expected


def test_double_deregistration_rejected():
    binder = Binder()
    ue = binder.register_node(NodeKind.UE, "car0", 26.0).node_id
    binder.deregister_node(ue)
    with pytest.raises(RegistryError):
        binder.deregister_node(ue)


def test_deregistering_cell_clears_serving_references():
    binder, cells = _binder_with_cells(2)
    ue = binder.register_node(NodeKind.UE, "car0", 26.0).node_id
    binder.set_serving_cell(ue, cells[1])
    binder.deregister_node(cells[1])
    assert binder.node(ue).serving_cell is None


# ----------------------------------------------------------------------
# allocations


def test_record_allocation_fills_entries():
    binder, cells = _binder_with_cells(1)
    binder.advance_tti(0)
    binder.record_allocation(0, Direction.DL, cells[0], range(25), cells[0])
    assert len(list(binder.allocation_items(0, Direction.DL))) == 25


def test_double_allocation_within_cell_rejected():
    binder, cells = _binder_with_cells(1)
    binder.advance_tti(0)
    binder.record_allocation(0, Direction.DL, cells[0], [3], cells[0])
    with pytest.raises(LedgerError):
        binder.record_allocation(0, Direction.DL, cells[0], [3], cells[0])


def test_same_rb_allowed_across_cells():
    binder, cells = _binder_with_cells(2)
    binder.advance_tti(0)
    binder.record_allocation(0, Direction.DL, cells[0], [7], cells[0])
    binder.record_allocation(0, Direction.DL, cells[1], [7], cells[1])

    # oracle: per-cell uniqueness holds over the full grid
    seen = {}
    for cell, rb, _tx in binder.allocation_items(0, Direction.DL):
        assert (cell, rb) not in seen
        seen[(cell, rb)] = True
    assert len(seen) == 2


def test_rb_out_of_range_rejected():
    binder, cells = _binder_with_cells(1, num_rbs=10)
    binder.advance_tti(0)
    with pytest.raises(LedgerError):
        binder.record_allocation(0, Direction.DL, cells[0], [10], cells[0])


# ----------------------------------------------------------------------
# co-channel queries


def test_no_allocations_give_empty_interferer_list():
    binder, cells = _binder_with_cells(2)
    binder.advance_tti(0)
    assert binder.co_channel_transmitters(0, Direction.DL, 5, cells[0]) == []


def test_co_channel_excludes_own_cell():
    binder, cells = _binder_with_cells(2)
    binder.advance_tti(0)
    binder.record_allocation(0, Direction.DL, cells[0], [7], cells[0])
    binder.record_allocation(0, Direction.DL, cells[1], [7], cells[1])
    got = binder.co_channel_transmitters(0, Direction.DL, 7, excluding_cell=cells[0])
    assert [node for node, _, _ in got] == [cells[1]]

    # oracle: full grid scan
    expected = sorted(
        tx
        for cell, rb, tx in binder.allocation_items(0, Direction.DL)
        if rb == 7 and cell != cells[0]
    )
    assert [node for node, _, _ in got] == expected


def test_ul_queries_return_ues_never_enbs():
    binder, cells = _binder_with_cells(2)
    binder.advance_tti(0)
    ue = binder.register_node(NodeKind.UE, "car0", 26.0).node_id
    binder.record_allocation(0, Direction.DL, cells[0], [3], cells[0])
    binder.record_allocation(0, Direction.UL, cells[0], [3], ue)
    got = binder.co_channel_transmitters(0, Direction.UL, 3, excluding_cell=cells[1])
    assert [node for node, _, _ in got] == [ue]


# ----------------------------------------------------------------------
# TTI bookkeeping


def test_advance_resets_grid_and_keeps_history():
    binder, cells = _binder_with_cells(1)
    for tti in range(42):
        binder.advance_tti(tti)
    binder.record_allocation(41, Direction.DL, cells[0], [0], cells[0])
    binder.advance_tti(42)
    assert list(binder.allocation_items(42, Direction.DL)) == []
    # previous TTI still answerable
    assert len(list(binder.allocation_items(41, Direction.DL))) == 1


def test_skipping_a_tti_rejected():
    binder, _ = _binder_with_cells(1)
    for tti in range(42):
        binder.advance_tti(tti)
    with pytest.raises(LedgerError):
        binder.advance_tti(43)


def test_two_tti_old_grid_discarded():
    binder, _ = _binder_with_cells(1)
    binder.advance_tti(0)
    binder.advance_tti(1)
    binder.advance_tti(2)
    with pytest.raises(LedgerError):
        binder.co_channel_transmitters(0, Direction.DL, 0, excluding_cell=1)


def test_allocation_only_into_current_tti():
    binder, cells = _binder_with_cells(1)
    binder.advance_tti(0)
    binder.advance_tti(1)
    with pytest.raises(LedgerError):
        binder.record_allocation(0, Direction.DL, cells[0], [0], cells[0])


# ----------------------------------------------------------------------
# randomized registry property


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_registry_matches_set_oracle(seed):
    rng = random.Random(seed)
    binder = Binder(num_rbs=10)
    live_oracle: set[int] = set()
    names = iter(range(10_000))
    for _ in range(300):
        if live_oracle and rng.random() < 0.4:
            victim = rng.choice(sorted(live_oracle))
            binder.deregister_node(victim)
            live_oracle.discard(victim)
        else:
            kind = NodeKind.UE if rng.random() < 0.8 else NodeKind.ENB
            rec = binder.register_node(kind, f"n{next(names)}", 26.0)
            live_oracle.add(rec.node_id)
        assert binder.live_ids() == live_oracle
