"""Requirement-driven structure generation and setup enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .model import (
    Agent,
    AgentGroup,
    AgentKind,
    Config,
    GroupKind,
    ManageLink,
    Model,
    RelKind,
    Requirement,
    ReqRole,
    SpsysError,
    Subsystem,
    SubsystemKind,
    TwinPair,
)
from .tracer import provenance
from .validator import ValidatedModel, _inherit, resolve_config, unwrap

WORLD_MIRROR_GROUP = "WorldSync"


class UnsatisfiedPart(SpsysError):
    pass


class NoParts(SpsysError):
    pass


@dataclass(frozen=True)
class ScaffoldResult:
    model: Model
    provenance: dict[str, str]


def _functional_sources(model: Model, req: Requirement) -> list[Requirement]:
    reqs = model.requirements_by_id
    return [reqs[t] for t in req.targets(RelKind.DERIVES, RelKind.SATISFIES) if reqs[t].role.is_functional]


def is_computational_part(model: Model, req: Requirement) -> bool:
    """A hybrid part serving only computational functions becomes one hybrid agent."""
    if req.role is not ReqRole.PART_HYBRID:
        return False
    sources = _functional_sources(model, req)
    return bool(sources) and all(s.role is ReqRole.FUNCTIONAL_COMPUTATIONAL for s in sources)


def scaffold(model: Model | ValidatedModel) -> ScaffoldResult:
    """Derive agents, twin groups and world-mirror agents from the requirements.

    Any structure already present in ``model`` is discarded. Every generated
    agent gets a hybrid controller; a twin pair shares one controller
    between its simulated and physical agents.
    """
    m = unwrap(model)
    subsystems: list[Subsystem] = []
    agents: list[Agent] = []
    groups: list[AgentGroup] = []
    twins: list[TwinPair] = []
    manages: list[ManageLink] = []
    origin: dict[str, str] = {}

    def agent(rid: str, suffix: str, kind: AgentKind, cont: str) -> str:
        aid = f"{rid}{suffix}"
        agents.append(Agent(aid, kind, (cont,)))
        origin[aid] = rid
        return aid

    def controller(rid: str) -> str:
        cid = f"{rid}_Cont"
        subsystems.append(Subsystem(cid, SubsystemKind.CONT_HYB))
        origin[cid] = rid
        return cid

    for req in m.requirements:
        if not req.role.is_part:
            continue
        if not _functional_sources(m, req):
            raise UnsatisfiedPart(f"part requirement '{req.id}' derives from no functional requirement")
        cont = controller(req.id)
        if req.role is ReqRole.PART_PHYSICAL:
            agent(req.id, "_Phy", AgentKind.PHYSICAL, cont)
        elif req.role is ReqRole.PART_SIMULATED:
            agent(req.id, "_Sim", AgentKind.SIMULATED, cont)
        elif is_computational_part(m, req):
            agent(req.id, "_Hyb", AgentKind.HYBRID, cont)
        else:
            sim = agent(req.id, "_Sim", AgentKind.SIMULATED, cont)
            phy = agent(req.id, "_Phy", AgentKind.PHYSICAL, cont)
            dt, pt = f"{req.id}_DTgrp", f"{req.id}_PTgrp"
            groups += [AgentGroup(dt, GroupKind.MIRROR_SIM, (sim,)), AgentGroup(pt, GroupKind.MIRROR_PHY, (phy,))]
            origin[dt] = origin[pt] = req.id
            twins.append(TwinPair(dt, pt))

    exog = [r for r in m.requirements if r.role is ReqRole.EXOG_AGENT]
    if exog:
        members = []
        for req in exog:
            members.append(agent(req.id, "_Sim", AgentKind.SIMULATED, controller(req.id)))
            manages.append(ManageLink(f"{req.id}_Sim", req.id))
        taken = {r.id for r in m.requirements} | set(origin)
        gid = WORLD_MIRROR_GROUP
        while gid in taken:
            gid += "_grp"
        groups.append(AgentGroup(gid, GroupKind.WORLD_MIRROR, tuple(members)))

    built = Model(m.name, m.requirements, subsystems, agents, groups, twins, (), manages)
    return ScaffoldResult(built, origin)


def functional_config_count(model: Model | ValidatedModel) -> int:
    """Number of functional configurations: 2 ** (optional functional requirements)."""
    m = unwrap(model)
    config = model.resolved_config if isinstance(model, ValidatedModel) else resolve_config(m)
    return _count_configs(m, config)


def _count_configs(m: Model, config: dict[str, Config]) -> int:
    optional = [r for r in m.requirements if r.role.is_functional and config[r.id] is Config.OPTIONAL]
    return 2 ** len(optional)


PHYSICAL, SIMULATED, ABSENT = "phy", "sim", "absent"


@dataclass(frozen=True)
class Setup:
    name: str
    members: tuple[str, ...]
    selections: dict[str, str]

    def to_json(self) -> dict:
        return {"name": self.name, "members": list(self.members), "selections": dict(self.selections)}


@dataclass(frozen=True)
class SetupPlan:
    setups: tuple[Setup, ...]
    functional_configurations: int

    def __len__(self) -> int:
        return len(self.setups)

    def render(self, functional: bool = False) -> str:
        width = len(str(len(self.setups)))
        lines = [f"{i:>{width}}  {s.name}  [{', '.join(s.members)}]" for i, s in enumerate(self.setups, 1)]
        if functional:
            lines.append(f"functional configurations = {self.functional_configurations}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {"count": len(self.setups), "functionalConfigurations": self.functional_configurations,
                "setups": [s.to_json() for s in self.setups]}

    def as_groups(self, prefix: str = "Setup") -> list[AgentGroup]:
        return [AgentGroup(f"{prefix}{i}", GroupKind.SETUP, s.members) for i, s in enumerate(self.setups, 1)]


def part_options(role: ReqRole, config: Config) -> list[str]:
    if role is ReqRole.PART_HYBRID:
        options = [PHYSICAL, SIMULATED]
    elif role is ReqRole.PART_PHYSICAL:
        options = [PHYSICAL]
    else:
        options = [SIMULATED]
    if config is Config.OPTIONAL:
        options.append(ABSENT)
    return options


def realisations(model: Model) -> dict[str, dict[str, list[str]]]:
    """Map each part requirement to the structure realising each embodiment."""
    out: dict[str, dict[str, list[str]]] = {}
    in_pairs = set()
    for pair in model.pairs_at(0):
        part = provenance(model, pair.sim) or provenance(model, pair.phy)
        in_pairs.update((pair.sim, pair.phy))
        if part is not None:
            sides = out.setdefault(part, {PHYSICAL: [], SIMULATED: []})
            sides[SIMULATED].append(pair.sim)
            sides[PHYSICAL].append(pair.phy)
    for agent in model.agents:
        if agent.kind is AgentKind.HYBRID:
            continue
        part = provenance(model, agent.id)
        if part is None or model.requirement(part).role is ReqRole.PART_HYBRID:
            continue
        if any(g.id in in_pairs for g in model.groups_containing(agent.id)):
            continue
        side = PHYSICAL if agent.kind is AgentKind.PHYSICAL else SIMULATED
        out.setdefault(part, {PHYSICAL: [], SIMULATED: []})[side].append(agent.id)
    return out


def enumerate_setups(model: Model | ValidatedModel) -> SetupPlan:
    """Every deployable setup: the product of per-part embodiment choices.

    Computational hybrid parts are always present. Hybrid agents outside
    any mirror group join every setup; world-mirror groups join setups that
    select at least one simulated side.
    """
    m = unwrap(model)
    config = model.resolved_config if isinstance(model, ValidatedModel) else _inherit(m).config
    parts = [r for r in m.requirements if r.role.is_part and not is_computational_part(m, r)]
    if not parts:
        raise NoParts("model has no part requirements to select from")
    where = realisations(m)

    mirror_members = set()
    for g in m.groups:
        if g.kind in (GroupKind.MIRROR_SIM, GroupKind.MIRROR_PHY):
            mirror_members.update(m.members_closure(g.id))
    free_hybrids = [a.id for a in m.agents if a.kind is AgentKind.HYBRID and a.id not in mirror_members]
    world = [g.id for g in m.groups if g.kind is GroupKind.WORLD_MIRROR]

    option_sets = [part_options(p.role, config[p.id]) for p in parts]
    setups = []
    for choice in itertools.product(*option_sets):
        selections = {p.id: c for p, c in zip(parts, choice)}
        members: list[str] = []
        for part, c in selections.items():
            if c != ABSENT:
                members += where.get(part, {}).get(c, [])
        members += free_hybrids
        if SIMULATED in choice:
            members += world
        name = ",".join(f"{k}={v}" for k, v in selections.items())
        setups.append(Setup(name, tuple(dict.fromkeys(members)), selections))
    return SetupPlan(tuple(setups), _count_configs(m, config))
