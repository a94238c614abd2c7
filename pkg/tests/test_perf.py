"""Machine-balance model: pinned design-point values, exact arithmetic."""

from fractions import Fraction

import pytest

from eamc.perf import (as_microseconds, as_picoseconds, balance_crossover,
                       balance_table, campaign_budget, halo_transfer_time,
                       lattice_sweep_time, machine_update_time,
                       spin_update_time)

MHZ = 10 ** 6


def test_spin_update_time_design_point():
    # 2000 update cores at 200 MHz: one spin every 2.5 ps, exactly
    t = spin_update_time(2000, 200 * MHZ)
    assert t == Fraction(1, 400_000_000_000)
    assert as_picoseconds(t) == Fraction(5, 2)


def test_machine_update_time_design_point():
    # 16 workers at 250 MHz: 0.125 ps per update machine-wide
    t = machine_update_time(2000, 250 * MHZ, 16)
    assert as_picoseconds(t) == Fraction(1, 8)
    # P=1 degenerates to the single-worker figure
    assert machine_update_time(2000, 250 * MHZ, 1) == \
        spin_update_time(2000, 250 * MHZ)


def test_lattice_sweep_time_design_point():
    # L=500 over 16 workers: 500^3 / (16 * 2000 * 250 MHz) = 15.625 us
    t = lattice_sweep_time(500, 2000, 250 * MHZ, 16)
    us = as_microseconds(t)
    assert us == Fraction(125, 8)
    assert 15 <= us <= 16


def test_halo_transfer_time():
    # one L^2 plane over n_l lanes at the link clock
    t = halo_transfer_time(500, 8, 15 * 250 * MHZ)
    assert t == Fraction(500 ** 2, 8 * 15 * 250 * MHZ)


def test_balance_crossover_design_point():
    # compute covers communication from L = ceil(2000*16 / (8*15)) = 267 up
    assert balance_crossover(2000, 16, 8, 15) == 267
    # exact-division edge: no spurious +1 from the ceiling
    assert balance_crossover(1920, 16, 8, 15) == 256
    assert balance_crossover(1920, 16, 8, 16) == 240


def test_balance_table_brackets_the_crossover():
    pts = balance_table(2000, 250 * MHZ, 16, 8, 15, sizes=(64, 266, 267, 500))
    by_l = {p.l: p for p in pts}
    assert not by_l[64].compute_bound
    assert not by_l[266].compute_bound
    assert by_l[267].compute_bound
    assert by_l[500].compute_bound
    # at the crossover the two times are within one lattice plane of equal
    assert by_l[267].sweep_time >= by_l[267].halo_time


def test_campaign_budget_reaches_1e20_exactly():
    # N_T=1, L=100, 10^12 sweeps, 100 samples: 10^20 spin updates
    total = campaign_budget(1, 100, 10 ** 12, 100)
    assert total == 10 ** 20
    assert isinstance(total, int)
    # a full production-scale sizing stays exact far past 2^63
    big = campaign_budget(32, 160, 10 ** 12, 10 ** 4)
    assert big == 32 * 160 ** 3 * 10 ** 12 * 10 ** 4


def test_model_validation():
    with pytest.raises(ValueError):
        spin_update_time(0, 200 * MHZ)
    with pytest.raises(ValueError):
        machine_update_time(2000, -1, 16)
    with pytest.raises(ValueError):
        campaign_budget(0, 100, 10, 10)
    with pytest.raises(ValueError):
        campaign_budget(1, 100, 10.5, 10)
