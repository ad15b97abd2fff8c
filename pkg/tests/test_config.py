import numpy as np
import pytest

from wpmec.config import (ConfigError, default_config, load_config,
                          save_config)


def test_defaults_match_reference_values():
    cfg = default_config()
    assert cfg.n == 10
    assert cfg.n1_count == 5 and cfg.n2_count == 5
    assert tuple(cfg.d) == (3.0, 5.0, 7.0, 9.0, 11.0) * 2
    assert cfg.slot_T == 0.1
    assert cfg.bandwidth_W == 2e5
    assert cfg.noise_N0 == 1e-9
    assert cfg.ap_power_P0 == 2.0
    assert cfg.p_max == 1.0
    assert cfg.harvest_eff == 0.8
    assert cfg.e_h_max == 1.6e-4
    assert cfg.e_min == 5e-6
    assert cfg.c_max_bits == 1e5
    assert cfg.V == 300.0
    assert cfg.m == 4
    assert cfg.feedback_bits_L == 16.0
    assert cfg.horizon == 1000


def test_rate_to_bits_conversion():
    cfg = default_config()
    # 1 Mbps and 50 kbps over a 100 ms slot
    assert cfg.a_max_bits == pytest.approx(1e5)
    assert cfg.r_max_bits == pytest.approx(5e3)
    assert cfg.eps_frac == pytest.approx(0.05)


def test_type_mask_layout():
    cfg = default_config(n1_count=2, n2_count=3, d1=(1.0, 2.0),
                         d2=(3.0, 4.0, 5.0))
    assert cfg.n == 5
    assert list(cfg.is_type2) == [False, False, True, True, True]


def test_replaced_recomputes_derived_fields():
    cfg = default_config()
    faster = cfg.replaced(eps_s=0.01, a_max_bps=2e6)
    assert faster.eps_frac == pytest.approx(0.1)
    assert faster.a_max_bits == pytest.approx(2e5)
    # original untouched
    assert cfg.eps_frac == pytest.approx(0.05)


@pytest.mark.parametrize("bad", [
    dict(slot_T=0.0),
    dict(V=-1.0),
    dict(n1_count=1),                      # d1 length mismatch
    dict(eps_s=0.1),                       # whole slot of feedback
    dict(eps_s=0.2),
    dict(m=0),
    dict(horizon=-5),
    dict(arrival_dist="gaussian"),
    dict(d1=(3.0, 5.0, -7.0, 9.0, 11.0)),
    dict(n1_count=0, n2_count=0, d1=(), d2=()),
])
def test_validation_rejects(bad):
    with pytest.raises(ConfigError):
        default_config(**bad)


def test_ini_round_trip(tmp_path):
    cfg = default_config(V=150.0, m=8, n1_count=1, n2_count=2,
                         d1=(4.0,), d2=(6.0, 8.0), seed=77)
    path = tmp_path / "net.ini"
    save_config(cfg, path)
    loaded = load_config(path)
    for name in ("V", "m", "n1_count", "n2_count", "d1", "d2", "seed",
                 "slot_T", "e_min", "arrival_dist", "solver_tol"):
        assert getattr(loaded, name) == getattr(cfg, name), name


def test_unknown_ini_key_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[algorithm]\nv = 100\nwarp_drive = 9\n")
    with pytest.raises(ConfigError, match="warp_drive"):
        load_config(path)


def test_missing_ini_file_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")
