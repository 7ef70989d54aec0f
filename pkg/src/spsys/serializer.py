"""Canonical ``.spsys`` text for a :class:`~spsys.model.Model`."""

from __future__ import annotations

from .model import Config, GroupKind, Model, ReqRole, SubsystemKind, AgentKind

INDENT = "  "

_ROLE_TEXT = {
    ReqRole.FUNCTIONAL_EMBODIED: "functional embodied",
    ReqRole.FUNCTIONAL_COMPUTATIONAL: "functional computational",
    ReqRole.PART_PHYSICAL: "part physical",
    ReqRole.PART_SIMULATED: "part simulated",
    ReqRole.PART_HYBRID: "part hybrid",
    ReqRole.HARDWARE: "hardware",
    ReqRole.EXOG_AGENT: "exogenous",
}
_SUB_TEXT = {
    SubsystemKind.CONT_PHY: "cont physical",
    SubsystemKind.CONT_SIM: "cont simulated",
    SubsystemKind.CONT_HYB: "cont hybrid",
    SubsystemKind.VIRT_REC_PHY: "virt_rec physical",
    SubsystemKind.VIRT_REC_SIM: "virt_rec simulated",
    SubsystemKind.VIRT_EFF_PHY: "virt_eff physical",
    SubsystemKind.VIRT_EFF_SIM: "virt_eff simulated",
    SubsystemKind.REAL_REC_PHY: "real_rec physical",
    SubsystemKind.REAL_REC_SIM: "real_rec simulated",
    SubsystemKind.REAL_EFF_PHY: "real_eff physical",
    SubsystemKind.REAL_EFF_SIM: "real_eff simulated",
}
_AGENT_TEXT = {AgentKind.PHYSICAL: "physical", AgentKind.SIMULATED: "simulated",
               AgentKind.HYBRID: "hybrid"}
_GROUP_TEXT = {
    GroupKind.PLAIN: "agents",
    GroupKind.WORLD_MIRROR: "world_mirror",
    GroupKind.MIRROR_PHY: "mirror_phy",
    GroupKind.MIRROR_SIM: "mirror_sim",
    GroupKind.SETUP: "setup",
}


def quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize(model: Model) -> str:
    """Render ``model`` as canonical text.

    Sections always appear in the order requirements, subsystems, agents,
    groups, mirrors, manage-links, allocations; entities keep the model's
    order. Implicit twin groups come out as explicit ``group`` blocks.
    """
    if not model.requirements and not any(
        (model.subsystems, model.agents, model.groups, model.twins, model.allocations, model.manages)
    ):
        return f"model {quote(model.name)} {{ requirements {{}} structure {{}} }}\n"

    lines = [f"model {quote(model.name)} {{"]
    lines += _block("requirements", _requirements(model))
    lines += _block("structure", _structure(model))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _block(head: str, body: list[str], depth: int = 1) -> list[str]:
    pad = INDENT * depth
    if not body:
        return [f"{pad}{head} {{}}"]
    return [f"{pad}{head} {{", *body, f"{pad}}}"]


def _requirements(model: Model) -> list[str]:
    pad = INDENT * 2
    out = []
    for req in model.requirements:
        head = f"req {req.id} : {_ROLE_TEXT[req.role]}"
        if req.config is not Config.UNSET:
            head += f" {req.config.value.lower()}"
        if not req.relations:
            out.append(f"{pad}{head};")
            continue
        out.append(f"{pad}{head} {{")
        out += [f"{pad}{INDENT}{rel.kind.value} {rel.target};" for rel in req.relations]
        out.append(f"{pad}}}")
    return out


def _structure(model: Model) -> list[str]:
    pad = INDENT * 2
    subs = model.subsystems_by_id
    out = [f"{pad}subsystem {s.id} : {_SUB_TEXT[s.kind]};" for s in model.subsystems if s.owner is None]
    for agent in model.agents:
        body = []
        for ref in agent.subsystems:
            sub = subs[ref]
            if sub.owner == agent.id:
                body.append(f"{pad}{INDENT}owns subsystem {sub.local_name} : {_SUB_TEXT[sub.kind]};")
            else:
                body.append(f"{pad}{INDENT}uses {ref};")
        out += _block(f"agent {agent.id} : {_AGENT_TEXT[agent.kind]}", body, 2)
    for group in model.groups:
        body = [f"{pad}{INDENT}member {m};" for m in group.members]
        out += _block(f"group {group.id} : {_GROUP_TEXT[group.kind]}", body, 2)
    out += [f"{pad}mirror {p.sim} <-> {p.phy};" for p in model.twins]
    out += [f"{pad}manage {m.agent} -> {m.exog};" for m in model.manages]
    out += [f"{pad}allocate {a.hardware} -> {a.target};" for a in model.allocations]
    return out
