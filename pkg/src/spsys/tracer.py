"""Backward tracing from structure to requirements.

An element's hardware requirements are the sources of allocations that
target it (for an agent, also those targeting any subsystem it uses). Each
hardware requirement's ``satisfies`` / ``derives`` relations then lead to
the functional requirements the element serves. An element that realises a
part requirement additionally inherits that part's functional sources.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    Agent,
    AgentGroup,
    AgentKind,
    GroupKind,
    Model,
    NotFound,
    RelKind,
    ReqRole,
    SpsysError,
    Subsystem,
    distinct,
    leaf_agents,
)
from .validator import ValidatedModel, unwrap

# Generated structure names: <PartReq><suffix>, see composer.scaffold.
PART_SUFFIXES = ("_Phy", "_Sim", "_Hyb", "_DTgrp", "_PTgrp", "_Cont")
IMPLICIT_SUFFIX = "__grp"
_SERVES = (RelKind.SATISFIES, RelKind.DERIVES)


class NotStructural(SpsysError):
    pass


@dataclass(frozen=True)
class TraceChain:
    element: str  # the allocated entity, or the traced element for part chains
    functional: str | None
    relation: RelKind | None
    hardware: str | None = None
    part: str | None = None

    def render(self) -> str:
        if self.hardware is not None:
            head = f"{self.element} <- allocate <- {self.hardware}"
        else:
            head = f"{self.element} <- realises <- {self.part}"
        if self.functional is None:
            return head
        return f"{head} -> {self.relation.value} -> {self.functional}"

    def to_json(self) -> dict:
        return {"element": self.element, "hardware": self.hardware, "part": self.part,
                "relation": self.relation.value if self.relation else None,
                "functional": self.functional}


@dataclass(frozen=True)
class TraceResult:
    element: str
    hardware_reqs: tuple[str, ...] = ()
    functional_reqs: tuple[str, ...] = ()
    part: str | None = None
    chains: tuple[TraceChain, ...] = field(default=())

    def render(self) -> str:
        return "\n".join(c.render() for c in self.chains)

    def to_json(self) -> dict:
        return {"element": self.element, "part": self.part,
                "hardwareReqs": list(self.hardware_reqs),
                "functionalReqs": list(self.functional_reqs),
                "chains": [c.to_json() for c in self.chains]}


def _by_name(model: Model, ident: str) -> str | None:
    base = ident[: -len(IMPLICIT_SUFFIX)] if ident.endswith(IMPLICIT_SUFFIX) else ident
    for suffix in PART_SUFFIXES:
        if base.endswith(suffix):
            req = model.get(base[: -len(suffix)])
            if req is not None and getattr(req, "role", None) is not None and req.role.is_part:
                return req.id
    return None


def _allocated_functionals(model: Model, targets: list[str]) -> list[str]:
    reqs = model.requirements_by_id
    out: list[str] = []
    for alloc in model.allocations:
        if alloc.target in targets:
            out += [t for t in reqs[alloc.hardware].targets(*_SERVES) if reqs[t].role.is_functional]
    return distinct(out)


_COMPATIBLE = {
    AgentKind.PHYSICAL: (ReqRole.PART_PHYSICAL, ReqRole.PART_HYBRID),
    AgentKind.SIMULATED: (ReqRole.PART_SIMULATED, ReqRole.PART_HYBRID),
    AgentKind.HYBRID: (ReqRole.PART_HYBRID,),
}


def provenance(model: Model | ValidatedModel, ident: str) -> str | None:
    """The part requirement an agent, group or subsystem realises, if recognisable.

    Tried in order: the generated naming scheme (``<Part>_Phy`` and so on,
    plus the ``__grp`` suffix of implicit twin groups); for agents, the name
    of an enclosing mirror group; finally a unique compatible part that
    derives from the functional requirements reached through allocations.
    """
    m = unwrap(model)
    entity = m.get(ident)
    if entity is None:
        raise NotFound(ident)
    named = _by_name(m, ident)
    if named is not None or isinstance(entity, Subsystem):
        return named
    if isinstance(entity, Agent):
        for group in m.groups_containing(ident):
            if group.kind in (GroupKind.MIRROR_SIM, GroupKind.MIRROR_PHY):
                named = _by_name(m, group.id)
                if named is not None:
                    return named
        roles = _COMPATIBLE[entity.kind]
        functionals = _allocated_functionals(m, [ident, *entity.subsystems])
    elif isinstance(entity, AgentGroup) and entity.kind in (GroupKind.MIRROR_SIM, GroupKind.MIRROR_PHY):
        roles = (ReqRole.PART_HYBRID,)
        targets: list[str] = []
        for agent in leaf_agents(m, ident):
            targets += [agent.id, *agent.subsystems]
        functionals = _allocated_functionals(m, targets)
    else:
        return None
    if not functionals:
        return None
    candidates = [
        r.id for r in m.requirements
        if r.role in roles and any(t in functionals for t in r.targets(*_SERVES))
    ]
    return candidates[0] if len(candidates) == 1 else None


def trace(model: Model | ValidatedModel, element: str) -> TraceResult:
    """Collect the allocate -> hardware -> functional chains for ``element``."""
    m = unwrap(model)
    entity = m.get(element)
    if entity is None:
        raise NotFound(element)
    if not isinstance(entity, (Agent, Subsystem)):
        raise NotStructural(f"'{element}' is not an agent or subsystem")
    targets = [element, *entity.subsystems] if isinstance(entity, Agent) else [element]
    reqs = m.requirements_by_id

    chains: list[TraceChain] = []
    hardware: list[str] = []
    relevant = [a for a in m.allocations if a.target in targets]
    relevant.sort(key=lambda a: (m.order(a.target), m.order(a.hardware)))
    for alloc in relevant:
        hw = reqs[alloc.hardware]
        hardware.append(hw.id)
        served = [rel for rel in hw.relations if rel.kind in _SERVES and reqs[rel.target].role.is_functional]
        if not served:
            chains.append(TraceChain(alloc.target, None, None, hardware=hw.id))
        chains += [TraceChain(alloc.target, rel.target, rel.kind, hardware=hw.id) for rel in served]

    part = provenance(m, element)
    if part is not None:
        for rel in reqs[part].relations:
            if rel.kind in _SERVES and reqs[rel.target].role.is_functional:
                chains.append(TraceChain(element, rel.target, rel.kind, part=part))

    functionals = distinct(c.functional for c in chains if c.functional is not None)
    return TraceResult(element, tuple(distinct(hardware)), tuple(functionals), part, tuple(chains))
