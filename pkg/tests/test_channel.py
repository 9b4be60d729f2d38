import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from vcellsim.binder import Binder, Direction, NodeKind
from vcellsim.channel import (
    CQI_EFFICIENCY,
    ChannelModel,
    ChannelParams,
    CqiTables,
    ShadowingMap,
    bits_per_rb,
    cqi_from_sinr,
    decode,
    mean_sinr_db,
    noise_dbm,
    path_loss_db,
    received_power_dbm,
)
from vcellsim.errors import ChannelError

from oracles import brute_force_sinr_db, random_allocated_scenario, reference_noise_dbm

PARAMS = ChannelParams()
TABLES = CqiTables()


# ----------------------------------------------------------------------
# path loss and received power


def test_path_loss_at_one_km_is_the_intercept():
    assert path_loss_db(1000.0, PARAMS) == pytest.approx(128.1, abs=1e-12)


def test_path_loss_clamps_below_min_distance():
    assert path_loss_db(10.0, PARAMS) == path_loss_db(35.0, PARAMS)


def test_path_loss_one_decade_step():
    assert path_loss_db(10_000.0, PARAMS) == pytest.approx(128.1 + 37.6, abs=1e-9)


def test_received_power_at_one_km():
    got = received_power_dbm(46.0, (0.0, 0.0), (1000.0, 0.0), PARAMS)
    assert got == pytest.approx(46.0 - 128.1, abs=1e-9)


def test_received_power_colocated_uses_min_distance():
    got = received_power_dbm(46.0, (5.0, 5.0), (5.0, 5.0), PARAMS)
    assert got == pytest.approx(46.0 - path_loss_db(35.0, PARAMS), abs=1e-12)


def test_received_power_linear_in_tx_power():
    base = received_power_dbm(40.0, (0.0, 0.0), (700.0, 300.0), PARAMS)
    boosted = received_power_dbm(43.0, (0.0, 0.0), (700.0, 300.0), PARAMS)
    assert boosted - base == pytest.approx(3.0, abs=1e-12)


def test_noise_closed_form():
    expected = -174.0 + 10.0 * math.log10(180e3) + 9.0
    assert noise_dbm(PARAMS) == pytest.approx(expected, abs=1e-12)
    assert noise_dbm(PARAMS) == pytest.approx(-112.447, abs=1e-3)


# ----------------------------------------------------------------------
# SINR


def _one_cell_one_ue(distance=1000.0):
    binder = Binder(num_rbs=10)
    cell = binder.register_node(NodeKind.ENB, "enb0", 46.0, (0.0, 0.0)).node_id
    ue = binder.register_node(NodeKind.UE, "car0", 26.0, (distance, 0.0)).node_id
    binder.set_serving_cell(ue, cell)
    binder.advance_tti(0)
    return binder, ChannelModel(binder, PARAMS, TABLES), cell, ue


def test_sinr_without_interference_is_snr():
    binder, channel, cell, ue = _one_cell_one_ue()
    binder.record_allocation(0, Direction.DL, cell, [0, 1, 2], cell)
    got = channel.sinr(ue, cell, 0, Direction.DL, [0, 1, 2])
    expected = (46.0 - 128.1) - reference_noise_dbm(PARAMS)
    assert got == pytest.approx([expected] * 3, abs=1e-9)


def test_equal_power_interferer_pushes_sinr_just_below_zero():
    binder = Binder(num_rbs=10)
    # two cells symmetric around the UE: equal received power
    c0 = binder.register_node(NodeKind.ENB, "enb0", 46.0, (0.0, 0.0)).node_id
    c1 = binder.register_node(NodeKind.ENB, "enb1", 46.0, (2000.0, 0.0)).node_id
    ue = binder.register_node(NodeKind.UE, "car0", 26.0, (1000.0, 0.0)).node_id
    binder.set_serving_cell(ue, c0)
    binder.advance_tti(0)
    binder.record_allocation(0, Direction.DL, c0, [4], c0)
    binder.record_allocation(0, Direction.DL, c1, [4], c1)
    channel = ChannelModel(binder, PARAMS, TABLES)
    (got,) = channel.sinr(ue, c0, 0, Direction.DL, [4])
    assert got < 0.0
    assert got == pytest.approx(0.0, abs=0.01)  # N is tiny next to S here


def test_sinr_on_unallocated_rb_rejected():
    binder, channel, cell, ue = _one_cell_one_ue()
    binder.record_allocation(0, Direction.DL, cell, [0], cell)
    with pytest.raises(ChannelError):
        channel.sinr(ue, cell, 0, Direction.DL, [0, 1])


def test_sinr_matches_brute_force_on_random_grids():
    rng = random.Random(20240)
    for _ in range(40):
        binder, channel, grants = random_allocated_scenario(rng)
        for ue, cell, direction, rbs in grants:
            got = channel.sinr(ue, cell, 0, direction, rbs)
            for value, rb in zip(got, rbs):
                expected = brute_force_sinr_db(binder, channel.params, ue, cell, 0, direction, rb)
                assert value == pytest.approx(expected, rel=1e-9)


def test_measure_full_grid_matches_per_rb_brute_force():
    rng = random.Random(77)
    binder, channel, grants = random_allocated_scenario(rng, num_rbs=8)
    serving_of = {ue: cell for ue, cell, _, _ in grants}
    for ue, cell in serving_of.items():
        report = channel.measure(ue, cell, 0, Direction.DL)
        assert len(report.per_rb_sinr_db) == binder.num_rbs
        for rb, value in enumerate(report.per_rb_sinr_db):
            expected = brute_force_sinr_db(binder, channel.params, ue, cell, 0, Direction.DL, rb)
            assert value == pytest.approx(expected, rel=1e-9)
        assert report.cqi == cqi_from_sinr(report.mean_sinr_db, TABLES)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_added_interferer_never_raises_sinr(seed):
    rng = random.Random(seed)
    binder = Binder(num_rbs=4)
    c0 = binder.register_node(NodeKind.ENB, "enb0", 46.0, (0.0, 0.0)).node_id
    c1 = binder.register_node(
        NodeKind.ENB, "enb1", rng.uniform(30.0, 50.0), (rng.uniform(100, 5000), rng.uniform(-1000, 1000))
    ).node_id
    ue = binder.register_node(
        NodeKind.UE, "car0", 26.0, (rng.uniform(50, 2000), rng.uniform(-500, 500))
    ).node_id
    binder.set_serving_cell(ue, c0)
    binder.advance_tti(0)
    channel = ChannelModel(binder, PARAMS, TABLES)

    binder.record_allocation(0, Direction.DL, c0, [0], c0)
    (before,) = channel.sinr(ue, c0, 0, Direction.DL, [0])
    binder.record_allocation(0, Direction.DL, c1, [0], c1)
    (after,) = channel.sinr(ue, c0, 0, Direction.DL, [0])
    assert after < before


# ----------------------------------------------------------------------
# CQI mapping


def test_cqi_zero_below_lowest_threshold():
    assert cqi_from_sinr(-30.0, TABLES) == 0


def test_cqi_fifteen_above_highest_threshold():
    assert cqi_from_sinr(40.0, TABLES) == 15


def test_cqi_boundary_is_inclusive():
    # oracle: linear scan of the threshold table
    def scan(sinr):
        best = 0
        for k in range(1, 16):
            if sinr >= TABLES.sinr_thresholds_db[k - 1]:
                best = k
        return best

    boundary = TABLES.sinr_thresholds_db[8]  # threshold of CQI 9
    assert cqi_from_sinr(boundary, TABLES) == scan(boundary) == 9


@given(st.floats(min_value=-40.0, max_value=40.0), st.floats(min_value=0.0, max_value=10.0))
def test_cqi_is_non_decreasing_in_sinr(sinr, delta):
    assert cqi_from_sinr(sinr + delta, TABLES) >= cqi_from_sinr(sinr, TABLES)


# ----------------------------------------------------------------------
# decode gate


def test_decode_above_threshold():
    threshold = TABLES.sinr_thresholds_db[6]  # CQI 7
    assert decode([threshold + 2.0], 7, TABLES) is True


def test_decode_cqi15_into_deep_fade_fails():
    assert decode([-5.0], 15, TABLES) is False


def test_decode_exactly_at_threshold_succeeds():
    threshold = TABLES.sinr_thresholds_db[10]
    assert decode([threshold], 11, TABLES) is True


def test_decode_rejects_cqi_zero():
    with pytest.raises(ChannelError):
        decode([10.0], 0, TABLES)


@given(st.floats(min_value=-6.7, max_value=45.0))
def test_link_adaptation_self_consistency(sinr):
    # any SINR at or above the lowest threshold decodes at its own CQI
    cqi = cqi_from_sinr(sinr, TABLES)
    assert cqi >= 1
    assert decode([sinr], cqi, TABLES) is True


@given(
    st.lists(st.floats(min_value=-30.0, max_value=40.0), min_size=1, max_size=20)
)
def test_decode_uses_linear_mean(sinrs):
    mean = mean_sinr_db(sinrs)
    cqi = cqi_from_sinr(mean, TABLES)
    if cqi >= 1:
        assert decode(sinrs, cqi, TABLES) is True


# ----------------------------------------------------------------------
# bits per RB


def test_bits_per_rb_against_efficiency_oracle():
    # oracle: floor(spectral efficiency x 144 resource elements)
    for cqi in range(1, 16):
        expected = math.floor(CQI_EFFICIENCY[cqi - 1] * 144)
        assert bits_per_rb(cqi, TABLES) == expected
    assert bits_per_rb(1, TABLES) == 21
    assert bits_per_rb(15, TABLES) == 799


def test_bits_per_rb_rejects_cqi_zero():
    with pytest.raises(ChannelError):
        bits_per_rb(0, TABLES)


# ----------------------------------------------------------------------
# association argmax invariance and purity


def test_common_power_offset_preserves_argmax():
    rng = random.Random(9)
    for _ in range(25):
        positions = [(rng.uniform(0, 3000), rng.uniform(0, 3000)) for _ in range(3)]
        ue_pos = (rng.uniform(0, 3000), rng.uniform(0, 3000))
        powers = [rng.uniform(38, 48) for _ in range(3)]
        offset = rng.uniform(-10, 10)

        def argmax(extra):
            received = [
                received_power_dbm(p + extra, pos, ue_pos, PARAMS)
                for p, pos in zip(powers, positions)
            ]
            return max(range(3), key=lambda i: (received[i], -i))

        assert argmax(0.0) == argmax(offset)


def test_channel_is_pure_without_shadowing():
    binder, channel, cell, ue = _one_cell_one_ue()
    binder.record_allocation(0, Direction.DL, cell, [0, 1], cell)
    first = channel.sinr(ue, cell, 0, Direction.DL, [0, 1])
    second = channel.sinr(ue, cell, 0, Direction.DL, [0, 1])
    assert first == second


def test_shadowing_is_fixed_per_pair_and_reciprocal():
    rng = random.Random(3)
    shadow = ShadowingMap(rng, sigma_db=8.0, enabled=True)
    a = shadow.loss_db(1, 2)
    assert shadow.loss_db(1, 2) == a
    assert shadow.loss_db(2, 1) == a  # reciprocal channel
    assert shadow.loss_db(1, 3) != a or shadow.loss_db(1, 4) != a


def test_shadowing_disabled_is_zero():
    shadow = ShadowingMap(random.Random(3), sigma_db=8.0, enabled=False)
    assert shadow.loss_db(1, 2) == 0.0
