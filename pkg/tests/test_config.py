import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enclosure.config import (
    SCHEMA,
    ConfigError,
    describe_defaults,
    emit_config,
    parse_config,
    parse_config_text,
    tau_range,
)
from enclosure.geometry import ConeFrame, DomainSpec

from .conftest import REFERENCE_INI

MINIMAL = """\
[domain]
center = 3, 0
radius = 1
[background]
lambda0 = 2
mu0 = 1
[inclusion.D]
kind = disc
center = 3, 0.2
radius = 0.3
lambdaD = 0
muD = 2
[cone.c]
apex = 0, 0
"""


def test_minimal_config_echoes_defaults():
    cfg = parse_config_text(MINIMAL)
    text = emit_config(cfg)
    for sec, keys in SCHEMA.items():
        assert f"[{sec}]" in text
        for key in keys:
            assert f"\n{key} = " in text
    assert cfg.probe.d_min is None and "dMin = auto" in text
    assert cfg.material.k == 1.0 and cfg.cones[0] == ConeFrame((0.0, 0.0), 1, 0.0)
    assert cfg.probe.h_grid == (0.25, 0.2, 0.16, 0.128, 0.1024, 0.08)


def test_round_trip_reference():
    cfg = parse_config_text(REFERENCE_INI)
    assert parse_config_text(emit_config(cfg)) == cfg
    assert emit_config(parse_config_text(emit_config(cfg))) == emit_config(cfg)


def test_round_trip_all_shapes():
    text = MINIMAL + """\
[inclusion.E]
kind = ellipse
center = 2.6, -0.4
semiaxes = 0.2, 0.1
angle = 0.3
lambdaD = -0.4
muD = -0.4
[inclusion.P]
kind = polygon
vertices = 3.4, -0.5; 3.6, -0.5; 3.5, -0.3
lambdaD = 1
muD = 1
[inclusion.S]
kind = star
center = 2.6, 0.5
baseRadius = 0.15
cosCoeffs = 0.02
sinCoeffs = 0, 0.01
lambdaD = 0
muD = 1
"""
    cfg = parse_config_text(text)
    assert [s.kind for s in cfg.material.inclusions] == ["disc", "ellipse", "polygon", "star"]
    assert parse_config_text(emit_config(cfg)) == cfg


@given(
    eps=st.floats(0.01, 0.2),
    tol=st.floats(1e-3, 0.1),
    pf=st.floats(0.0, 4.0),
    seed=st.integers(0, 2**31),
    level=st.floats(0.0, 0.5),
    ms=st.floats(0.005, 0.1),
    theta=st.floats(-3.0, 3.0),
)
@settings(max_examples=40, deadline=None)
def test_round_trip_property(eps, tol, pf, seed, level, ms, theta):
    apex = (3 - 2 * math.cos(theta), -2 * math.sin(theta))
    text = MINIMAL.replace("apex = 0, 0", f"apex = {apex[0]!r}, {apex[1]!r}\ntheta0 = {theta!r}") + (
        f"[probe]\nepsBand = {eps!r}\nbisectionTol = {tol!r}\nprefactor = {pf!r}\n"
        f"[noise]\nseed = {seed}\nlevel = {level!r}\n[mesh]\nmeshSize = {ms!r}\n"
    )
    cfg = parse_config_text(text)
    assert parse_config_text(emit_config(cfg)) == cfg


@pytest.mark.parametrize(
    "patch,msg",
    [
        ("[probe]\nfoo = 1\n", "unknown key 'probe.foo'"),
        ("[bogus]\nx = 1\n", "unknown section 'bogus'"),
        ("[probe]\nhGrid = 0.1, 0.2, 0.05, 0.01\n", "probe.hGrid"),
        ("[probe]\ndMin = 0.4\ndMax = 0.3\n", "probe.dMin"),
        ("[noise]\nlevel = 1.5\n", "noise.level"),
        ("[mesh]\nmeshSize = -1\n", "mesh.meshSize"),
        ("[output]\nplot = maybe\n", "output.plot"),
        ("[probe]\nepsBand = abc\n", "probe.epsBand: expected a number"),
    ],
)
def test_invalid_values_name_the_key(patch, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config_text(MINIMAL + patch)


def test_apex_inside_domain_rejected():
    with pytest.raises(ConfigError, match="cone.c.apex: cone apex .* inside the closed domain"):
        parse_config_text(MINIMAL.replace("apex = 0, 0", "apex = 2.5, 0"))


def test_jump_condition_violation():
    text = MINIMAL.replace("lambdaD = 0\nmuD = 2", "lambdaD = -1\nmuD = 0.5")
    with pytest.raises(ConfigError, match="inclusion.D: jump condition violated: lambdaD\\+muD < 0 with muD > 0"):
        parse_config_text(text)


def test_missing_required_key():
    with pytest.raises(ConfigError, match="domain.radius: required key missing"):
        parse_config_text(MINIMAL.replace("radius = 1\n", "", 1))
    with pytest.raises(ConfigError, match="inclusion.D.muD: required key missing"):
        parse_config_text(MINIMAL.replace("muD = 2\n", ""))


def test_inclusion_outside_domain():
    with pytest.raises(ConfigError, match="inclusion 'D' is not strictly inside"):
        parse_config_text(MINIMAL.replace("center = 3, 0.2", "center = 3.9, 0.2"))


def test_unknown_shape_kind():
    with pytest.raises(ConfigError, match="unknown shape kind 'blob'"):
        parse_config_text(MINIMAL.replace("kind = disc", "kind = blob"))


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("no section header\n")
    with pytest.raises(ConfigError, match="malformed"):
        parse_config(p)
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "missing.ini")


def test_auto_d_range_brackets_domain():
    cfg = parse_config_text(MINIMAL)
    d_min, d_max = cfg.d_range(cfg.cones[0])
    # tau ranges over [2, 4] on the domain; auto shrinks 5% at each end
    assert 1 / d_min == pytest.approx(3.9, abs=1e-3)
    assert 1 / d_max == pytest.approx(2.1, abs=1e-3)


def test_tau_range_rejects_disjoint_cone():
    with pytest.raises(ConfigError, match="does not meet"):
        tau_range(DomainSpec((3.0, 0.0), 1.0), ConeFrame((0.0, 0.0), 1, math.pi))


def test_describe_defaults_lists_every_key():
    text = describe_defaults()
    for keys in SCHEMA.values():
        for key in keys:
            assert f"  {key}:" in text
