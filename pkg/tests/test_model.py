import pytest

from conftest import build
from spsys.model import (
    Agent,
    AgentGroup,
    AgentKind,
    CyclicMembership,
    DanglingReference,
    DuplicateIdentifier,
    GroupKind,
    InvalidIdentifier,
    Model,
    MultipleControllers,
    NoController,
    NotFound,
    Subsystem,
    SubsystemKind,
    cont_subsys_of,
    leaf_agents,
    resolve,
)


def test_resolve_hybrid_agent(final):
    talker = resolve(final, "Talker")
    assert isinstance(talker, Agent)
    assert talker.kind is AgentKind.HYBRID


def test_resolve_missing_on_empty_model():
    with pytest.raises(NotFound):
        resolve(Model("m"), "X")


def test_resolve_owned_subsystem():
    m = build("agent TiagoPhy : physical { owns subsystem Cont : cont physical; owns subsystem Lidar : real_rec physical; }")
    lidar = resolve(m, "TiagoPhy.Lidar")
    assert lidar.kind is SubsystemKind.REAL_REC_PHY
    assert lidar.owner == "TiagoPhy"
    assert lidar.local_name == "Lidar"


def test_leaf_agents_robot_dt(final):
    agents = [a.id for a in leaf_agents(final, "Robot_DTgrp")]
    assert set(agents) == {"TiagoSim", "FakeAudio", "Talker"}
    assert agents == sorted(agents, key=final.order)


def test_leaf_agents_empty_group():
    m = build("group G : agents { }")
    assert leaf_agents(m, "G") == []


def test_leaf_agents_nested_three_deep():
    m = build("""
    subsystem C : cont hybrid;
    agent A : hybrid { uses C; }
    agent B : hybrid { uses C; }
    group G3 : agents { member B; }
    group G2 : agents { member G3; member A; }
    group G1 : agents { member G2; member B; }
    """)
    # brute-force closure
    groups = {g.id: g.members for g in m.groups}
    seen, todo = set(), ["G1"]
    while todo:
        for x in groups[todo.pop()]:
            if x in groups:
                todo.append(x)
            else:
                seen.add(x)
    result = [a.id for a in leaf_agents(m, "G1")]
    assert set(result) == seen
    assert result == ["A", "B"]
    assert leaf_agents(m, "G1") == leaf_agents(m, "G1")


def test_leaf_agents_unknown_group():
    with pytest.raises(NotFound):
        leaf_agents(Model("m"), "G")


def test_cont_subsys_of_shared_hybrid(final):
    cont = cont_subsys_of(final, "TiagoPhy")
    assert cont.id == "RobotIf"
    assert cont.kind is SubsystemKind.CONT_HYB
    assert cont is cont_subsys_of(final, "TiagoSim")


def test_cont_subsys_of_phy_only():
    m = build("agent A : physical { owns subsystem Cont : cont physical; }")
    assert cont_subsys_of(m, "A").kind is SubsystemKind.CONT_PHY


def test_cont_subsys_of_two_controllers():
    m = build("agent A : physical { owns subsystem C1 : cont physical; owns subsystem C2 : cont hybrid; }")
    with pytest.raises(MultipleControllers):
        cont_subsys_of(m, "A")


def test_cont_subsys_of_none():
    m = build("agent A : physical { }")
    with pytest.raises(NoController):
        cont_subsys_of(m, "A")


def test_every_valid_agent_has_controller(final):
    for agent in final.agents:
        cont = cont_subsys_of(final, agent.id)
        assert cont.kind.is_controller
        if agent.kind is AgentKind.HYBRID:
            assert cont.kind is SubsystemKind.CONT_HYB


def test_duplicate_identifier_rejected():
    with pytest.raises(DuplicateIdentifier):
        Model("m", subsystems=[Subsystem("X", SubsystemKind.CONT_HYB)], agents=[Agent("X", AgentKind.HYBRID, ())])


def test_invalid_identifier_rejected():
    with pytest.raises(InvalidIdentifier):
        Model("m", agents=[Agent("9lives", AgentKind.HYBRID, ())])


def test_dangling_reference_rejected():
    with pytest.raises(DanglingReference):
        Model("m", agents=[Agent("A", AgentKind.HYBRID, ("Ghost",))])


def test_membership_cycle_rejected():
    groups = [AgentGroup("G1", GroupKind.PLAIN, ("G2",)), AgentGroup("G2", GroupKind.PLAIN, ("G1",))]
    with pytest.raises(CyclicMembership):
        Model("m", groups=groups)


def test_shared_subsystem_identity(final):
    refs = [a for a in final.agents if "RobotIf" in a.subsystems]
    assert len(refs) == 2
    assert final.subsystem("RobotIf") is resolve(final, "RobotIf")
    assert len([s for s in final.subsystems if s.id == "RobotIf"]) == 1


def test_model_is_immutable(final):
    with pytest.raises(AttributeError):
        final.name = "other"
