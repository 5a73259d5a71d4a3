import json
from dataclasses import fields

import pytest
from hypothesis import given, strategies as st

from twistlab import config
from twistlab.config import RunConfig


def test_every_field_has_default():
    cfg = RunConfig()
    for f in fields(RunConfig):
        assert hasattr(cfg, f.name)


def test_echo_is_sorted_json():
    d = json.loads(RunConfig().echo())
    assert list(d) == sorted(d)
    assert d["qs"] == list(config.DEFAULT_QS)


def test_parse_kv():
    text = """
    # a comment
    q = 211
    forms = 11a, 37a   # trailing comment
    interval = 0.5, 1.5
    assert = true
    xi = none
    resonator-L = 12
    """
    d = config.parse_kv(text)
    assert d == {"q": 211, "forms": ("11a", "37a"), "interval": (0.5, 1.5), "assert_": True, "xi": None,
                 "resonator_L": 12.0}


@pytest.mark.parametrize("bad", ["q", "nosuch = 1", "quick = maybe", "q = x"])
def test_parse_kv_errors(bad):
    with pytest.raises(ValueError):
        config.parse_kv(bad)


def test_load_precedence(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("q = 211\nlam = 0.2\n")
    cfg = config.load(p, q=499, lam=None)
    assert cfg.q == 499 and cfg.lam == 0.2


def test_cache_dir(monkeypatch, tmp_path):
    assert RunConfig().cache_dir() is None
    monkeypatch.setenv("TWISTLAB_CACHE", str(tmp_path))
    assert RunConfig().cache_dir() == tmp_path
    assert RunConfig(cache="/elsewhere").cache_dir().as_posix() == "/elsewhere"


@given(st.integers(2, 10**6), st.floats(0.01, 0.25), st.lists(st.integers(2, 10**4), min_size=1, max_size=6))
def test_roundtrip_through_kv(q, lam, qs):
    text = f"q = {q}\nlam = {lam!r}\nqs = {','.join(map(str, qs))}\n"
    cfg = config.load(None, **config.parse_kv(text))
    assert (cfg.q, cfg.lam, cfg.qs) == (q, lam, tuple(qs))
