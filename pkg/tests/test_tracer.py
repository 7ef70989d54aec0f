import pytest

from conftest import build
from spsys.model import NotFound
from spsys.tracer import NotStructural, provenance, trace

REQS = """req Navigation : functional embodied obligatory;
req Speech : functional embodied obligatory;
req Robot : part physical { derives Navigation; derives Speech; }
req HwLidar : hardware { satisfies Navigation; }
req HwMic : hardware { satisfies Speech; }"""

AGENT = """agent TiagoPhy : physical {
  owns subsystem Cont : cont hybrid;
  owns subsystem Lidar : real_rec physical;
  owns subsystem Mic : real_rec physical;
  owns subsystem Spare : real_eff physical;
}"""


def test_trace_allocated_subsystem():
    m = build(AGENT + "\nallocate HwLidar -> TiagoPhy.Lidar;", REQS)
    result = trace(m, "TiagoPhy.Lidar")
    assert result.hardware_reqs == ("HwLidar",)
    assert result.functional_reqs == ("Navigation",)
    assert result.render() == "TiagoPhy.Lidar <- allocate <- HwLidar -> satisfies -> Navigation"


def test_trace_without_allocations_or_provenance():
    m = build(AGENT, REQS)
    result = trace(m, "TiagoPhy.Spare")
    assert result.hardware_reqs == ()
    assert result.functional_reqs == ()
    assert result.chains == ()


def test_trace_agent_unions_subsystem_chains():
    m = build(AGENT + "\nallocate HwMic -> TiagoPhy.Mic;\nallocate HwLidar -> TiagoPhy.Lidar;", REQS)
    result = trace(m, "TiagoPhy")
    assert result.hardware_reqs == ("HwLidar", "HwMic")
    assert set(result.functional_reqs) == {"Navigation", "Speech"}


def test_trace_every_functional_has_evidence(final):
    for agent in final.agents:
        result = trace(final, agent.id)
        evidenced = {c.functional for c in result.chains}
        assert set(result.functional_reqs) == evidenced


def test_trace_part_provenance(final):
    result = trace(final, "SmartHome_Phy")
    assert result.part == "SmartHome"
    assert result.functional_reqs == ("HomeMonitoring",)
    assert "SmartHome_Phy <- realises <- SmartHome -> derives -> HomeMonitoring" in result.render()


def test_trace_adding_allocation_is_monotone():
    before = trace(build(AGENT + "\nallocate HwLidar -> TiagoPhy.Lidar;", REQS), "TiagoPhy")
    after = trace(build(AGENT + "\nallocate HwLidar -> TiagoPhy.Lidar;\nallocate HwMic -> TiagoPhy;", REQS), "TiagoPhy")
    assert set(before.functional_reqs) <= set(after.functional_reqs)
    assert set(before.hardware_reqs) <= set(after.hardware_reqs)


def test_trace_rejects_groups_and_requirements(final):
    for ident in ("Robot_DTgrp", "Navigation"):
        with pytest.raises(NotStructural):
            trace(final, ident)


def test_trace_unknown(final):
    with pytest.raises(NotFound):
        trace(final, "Nope")


def test_provenance_rules(final):
    assert provenance(final, "FallDetector_Sim__grp") == "FallDetector"
    assert provenance(final, "TiagoSim") == "Robot"
    assert provenance(final, "ComplexTaskExecution") is None


def test_trace_json_shape(final):
    data = trace(final, "FallDetector_Phy").to_json()
    assert data["hardwareReqs"] == ["HwFallCamera"]
    assert data["chains"][0]["relation"] == "satisfies"
