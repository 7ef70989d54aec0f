from fractions import Fraction

import pytest

import oracle
from modelgen import MAX_ENTITIES, entity_count, random_models
from spsys.advisor import MakeHybrid, MergeCont, apply_what_if
from spsys.metrics import compute_all
from spsys.model import SubsystemKind
from spsys.parser import parse
from spsys.serializer import serialize
from spsys.validator import validate

MODELS = random_models(100)
EMBODIED = (SubsystemKind.CONT_PHY, SubsystemKind.CONT_SIM)


def test_generator_yields_valid_small_models():
    assert len(MODELS) == 100
    for m in MODELS:
        assert entity_count(m) <= MAX_ENTITIES
        assert validate(m).ok, m.name


def test_generator_covers_interesting_cases():
    assert sum(1 for m in MODELS if m.twins) >= 20
    assert sum(1 for m in MODELS if any(s.kind in EMBODIED for s in m.subsystems)) >= 20
    assert sum(1 for m in MODELS if any(s.kind.is_real for s in m.subsystems)) >= 20


def test_factor_range():
    for m in MODELS:
        for name, ratio in compute_all(m).items():
            if ratio.defined:
                assert 0 <= ratio.value <= 1, (m.name, name)


def test_metrics_match_oracle():
    for m in MODELS:
        fs = compute_all(m)
        assert (fs.iif.numerator, fs.iif.denominator) == oracle.iif(m), m.name
        assert (fs.dgf.numerator, fs.dgf.denominator) == oracle.dgf(m), m.name
        assert (fs.dtc.numerator, fs.dtc.denominator) == oracle.dtc(m), m.name
        assert [(r.numerator, r.denominator) for r in fs.mif.values()] == oracle.mif(m), m.name


def test_iif_monotone_under_make_hybrid():
    checked = 0
    for m in MODELS:
        for sub in (s for s in m.subsystems if s.kind in EMBODIED):
            report, _ = apply_what_if(m, [MakeHybrid(sub.id)])
            before, after = report.before, report.after
            assert after.iif.numerator == before.iif.numerator + 1
            assert after.iif.denominator == before.iif.denominator
            assert after.iif.value > before.iif.value
            if before.dgf.defined:
                assert after.dgf.value >= before.dgf.value
            for label, ratio in before.mif.items():
                if ratio.defined:
                    assert after.mif[label].value >= ratio.value
            checked += 1
    assert checked >= 50


def test_iif_monotone_under_merge():
    checked = 0
    for m in MODELS:
        sims = [s.id for s in m.subsystems if s.kind is SubsystemKind.CONT_SIM]
        phys = [s.id for s in m.subsystems if s.kind is SubsystemKind.CONT_PHY]
        if not (sims and phys):
            continue
        report, _ = apply_what_if(m, [MergeCont(sims[0], phys[0], "Merged")])
        h, t = report.before.iif.numerator, report.before.iif.denominator
        assert report.after.iif == type(report.after.iif)(h + 1, t - 1)
        assert Fraction(h + 1, t - 1) > Fraction(h, t)
        checked += 1
    assert checked >= 5


def test_iif_one_iff_no_embodied_controllers():
    for m in MODELS:
        iif = compute_all(m).iif
        has_embodied = any(s.kind in EMBODIED for s in m.subsystems)
        assert (iif.defined and iif.value == 1) == (iif.defined and not has_embodied)


def test_dtc_zero_iff_nothing_mirrored():
    for m in MODELS:
        dtc = compute_all(m).dtc
        if dtc.defined:
            assert (dtc.value == 0) == (oracle.dtc(m)[0] == 0)


@pytest.mark.parametrize("m", MODELS, ids=lambda m: m.name)
def test_round_trip_and_fixed_point(m):
    text = serialize(m)
    result = parse(text, "gen.spsys")
    assert result.diagnostics == []
    assert result.model == m
    assert serialize(result.model) == text
