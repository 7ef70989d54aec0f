"""Typed entity graph for simulated-physical system architectures.

A :class:`Model` holds a requirement graph and a structure graph (subsystems,
agents, groups) plus the cross-links between them: twin pairs, hardware
allocations and manage-links. Construction checks structural integrity only
(identifier syntax, one shared namespace, referential integrity, acyclic
group membership); the stereotype rules live in :mod:`spsys.validator`.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

_SEGMENT = r"[A-Za-z_][A-Za-z0-9_]*"
IDENT_RE = re.compile(rf"^{_SEGMENT}$")
QUALIFIED_RE = re.compile(rf"^{_SEGMENT}(\.{_SEGMENT})?$")


class SpsysError(Exception):
    """Base class for all errors raised by this package."""


class ModelError(SpsysError, ValueError):
    pass


class InvalidIdentifier(ModelError):
    pass


class DuplicateIdentifier(ModelError):
    def __init__(self, ident: str) -> None:
        super().__init__(f"duplicate identifier '{ident}'")
        self.ident = ident


class DanglingReference(ModelError):
    def __init__(self, source: str, target: str) -> None:
        super().__init__(f"'{source}' refers to undeclared '{target}'")
        self.source = source
        self.target = target


class CyclicMembership(ModelError):
    def __init__(self, cycle: list[str]) -> None:
        super().__init__("cyclic group membership: " + " -> ".join(cycle))
        self.cycle = cycle


class NotFound(SpsysError, KeyError):
    def __init__(self, ident: str, expected: str = "entity") -> None:
        super().__init__(ident)
        self.ident = ident
        self.expected = expected

    def __str__(self) -> str:
        return f"no {self.expected} named '{self.ident}'"


class NoController(ModelError):
    pass


class MultipleControllers(ModelError):
    pass


class ReqRole(str, Enum):
    FUNCTIONAL_EMBODIED = "FunctionalEmbodied"
    FUNCTIONAL_COMPUTATIONAL = "FunctionalComputational"
    PART_PHYSICAL = "PartPhysical"
    PART_SIMULATED = "PartSimulated"
    PART_HYBRID = "PartHybrid"
    HARDWARE = "Hardware"
    EXOG_AGENT = "ExogAgent"

    @property
    def is_functional(self) -> bool:
        return self in (ReqRole.FUNCTIONAL_EMBODIED, ReqRole.FUNCTIONAL_COMPUTATIONAL)

    @property
    def is_part(self) -> bool:
        return self in (ReqRole.PART_PHYSICAL, ReqRole.PART_SIMULATED, ReqRole.PART_HYBRID)


class Config(str, Enum):
    OBLIGATORY = "Obligatory"
    OPTIONAL = "Optional"
    UNSET = "Unset"


class RelKind(str, Enum):
    DERIVES = "derives"
    SATISFIES = "satisfies"
    VERIFIES = "verifies"
    REFINES = "refines"


class Embodiment(str, Enum):
    PHYSICAL = "physical"
    SIMULATED = "simulated"
    HYBRID = "hybrid"


class SubsystemKind(str, Enum):
    CONT_PHY = "ContPhy"
    CONT_SIM = "ContSim"
    CONT_HYB = "ContHyb"
    VIRT_REC_PHY = "VirtRecPhy"
    VIRT_REC_SIM = "VirtRecSim"
    VIRT_EFF_PHY = "VirtEffPhy"
    VIRT_EFF_SIM = "VirtEffSim"
    REAL_REC_PHY = "RealRecPhy"
    REAL_REC_SIM = "RealRecSim"
    REAL_EFF_PHY = "RealEffPhy"
    REAL_EFF_SIM = "RealEffSim"

    @property
    def is_controller(self) -> bool:
        return self.value.startswith("Cont")

    @property
    def is_real(self) -> bool:
        return self.value.startswith("Real")

    @property
    def is_virtual(self) -> bool:
        return self.value.startswith("Virt")

    @property
    def embodiment(self) -> Embodiment:
        if self.value.endswith("Phy"):
            return Embodiment.PHYSICAL
        if self.value.endswith("Sim"):
            return Embodiment.SIMULATED
        return Embodiment.HYBRID


class AgentKind(str, Enum):
    PHYSICAL = "Physical"
    SIMULATED = "Simulated"
    HYBRID = "Hybrid"


class GroupKind(str, Enum):
    PLAIN = "Plain"
    WORLD_MIRROR = "WorldMirror"
    MIRROR_PHY = "MirrorPhy"
    MIRROR_SIM = "MirrorSim"
    SETUP = "Setup"


@dataclass(frozen=True)
class Relation:
    kind: RelKind
    target: str


@dataclass(frozen=True)
class Requirement:
    id: str
    role: ReqRole
    config: Config = Config.UNSET
    relations: tuple[Relation, ...] = ()

    def targets(self, *kinds: RelKind) -> Iterator[str]:
        for rel in self.relations:
            if not kinds or rel.kind in kinds:
                yield rel.target


@dataclass(frozen=True)
class Subsystem:
    id: str
    kind: SubsystemKind
    owner: str | None = None  # set for subsystems declared inline in an agent

    @property
    def local_name(self) -> str:
        return self.id.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class Agent:
    id: str
    kind: AgentKind
    subsystems: tuple[str, ...] = ()


@dataclass(frozen=True)
class AgentGroup:
    id: str
    kind: GroupKind
    members: tuple[str, ...] = ()


@dataclass(frozen=True)
class TwinPair:
    sim: str
    phy: str
    layer: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Allocation:
    hardware: str
    target: str


@dataclass(frozen=True)
class ManageLink:
    agent: str
    exog: str


Entity = Union[Requirement, Subsystem, Agent, AgentGroup]


@dataclass(frozen=True)
class Model:
    """Immutable architecture model.

    Entity collections are tuples in canonical declaration order; use
    :meth:`get` or the ``*_by_id`` helpers for lookups.
    """

    name: str
    requirements: tuple[Requirement, ...] = ()
    subsystems: tuple[Subsystem, ...] = ()
    agents: tuple[Agent, ...] = ()
    groups: tuple[AgentGroup, ...] = ()
    twins: tuple[TwinPair, ...] = ()
    allocations: tuple[Allocation, ...] = ()
    manages: tuple[ManageLink, ...] = ()
    _index: dict[str, Entity] = field(default_factory=dict, init=False, repr=False, compare=False)
    _order: dict[str, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("requirements", "subsystems", "agents", "groups", "twins", "allocations", "manages"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "subsystems", self._canonical_subsystems())
        index: dict[str, Entity] = {}
        order: dict[str, int] = {}
        for entity in self.entities():
            pattern = QUALIFIED_RE if isinstance(entity, Subsystem) else IDENT_RE
            if not pattern.match(entity.id):
                raise InvalidIdentifier(f"invalid identifier '{entity.id}'")
            if entity.id in index:
                raise DuplicateIdentifier(entity.id)
            index[entity.id] = entity
            order[entity.id] = len(order)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_order", order)
        self._check_references()
        self._check_acyclic()
        object.__setattr__(self, "twins", tuple(self._layered_twins()))

    # -- construction checks -------------------------------------------------

    def _canonical_subsystems(self) -> tuple[Subsystem, ...]:
        # Shared subsystems first, then inline-owned ones in owner/reference order.
        rank = {}
        for ai, agent in enumerate(self.agents):
            for ri, ref in enumerate(agent.subsystems):
                rank.setdefault(ref, (ai, ri))
        shared = [s for s in self.subsystems if s.owner is None]
        owned = [s for s in self.subsystems if s.owner is not None]
        owned.sort(key=lambda s: rank.get(s.id, (len(self.agents), 0)))
        return tuple(shared + owned)

    def _expect(self, source: str, target: str, *kinds: type) -> None:
        entity = self._index.get(target)
        if entity is None or not isinstance(entity, kinds):
            raise DanglingReference(source, target)

    def _check_references(self) -> None:
        for req in self.requirements:
            for target in req.targets():
                self._expect(req.id, target, Requirement)
        for sub in self.subsystems:
            if sub.owner is not None:
                self._expect(sub.id, sub.owner, Agent)
                if not sub.id.startswith(sub.owner + ".") or sub.id not in self._index[sub.owner].subsystems:
                    raise ModelError(f"owned subsystem '{sub.id}' must be used by its owner '{sub.owner}'")
            elif "." in sub.id:
                raise InvalidIdentifier(f"shared subsystem '{sub.id}' cannot have a qualified name")
        for agent in self.agents:
            if len(set(agent.subsystems)) != len(agent.subsystems):
                raise ModelError(f"agent '{agent.id}' references a subsystem twice")
            for ref in agent.subsystems:
                self._expect(agent.id, ref, Subsystem)
        for group in self.groups:
            if len(set(group.members)) != len(group.members):
                raise ModelError(f"group '{group.id}' lists a member twice")
            for member in group.members:
                self._expect(group.id, member, Agent, AgentGroup)
        for pair in self.twins:
            self._expect("mirror", pair.sim, AgentGroup)
            self._expect("mirror", pair.phy, AgentGroup)
        for alloc in self.allocations:
            self._expect("allocate", alloc.hardware, Requirement)
            self._expect(alloc.hardware, alloc.target, Agent, Subsystem)
        for link in self.manages:
            self._expect("manage", link.agent, Agent)
            self._expect(link.agent, link.exog, Requirement)

    def _check_acyclic(self) -> None:
        state: dict[str, int] = {}
        stack: list[str] = []

        def visit(gid: str) -> None:
            state[gid] = 1
            stack.append(gid)
            for member in self.group(gid).members:
                if not isinstance(self._index[member], AgentGroup):
                    continue
                if state.get(member) == 1:
                    raise CyclicMembership(stack[stack.index(member):] + [member])
                if member not in state:
                    visit(member)
            stack.pop()
            state[gid] = 2

        for group in self.groups:
            if group.id not in state:
                visit(group.id)

    def _layered_twins(self) -> list[TwinPair]:
        # A pair nested inside either side of another pair sits one layer deeper.
        below = {
            i: self.descendant_groups(p.sim) | self.descendant_groups(p.phy)
            for i, p in enumerate(self.twins)
        }
        layers: dict[int, int] = {}

        def layer(i: int, seen: frozenset[int]) -> int:
            if i not in layers:
                pair = self.twins[i]
                parents = [
                    j for j in below
                    if j != i and j not in seen and (pair.sim in below[j] or pair.phy in below[j])
                ]
                layers[i] = 1 + max((layer(j, seen | {i}) for j in parents), default=-1)
            return layers[i]

        return [replace(p, layer=layer(i, frozenset())) for i, p in enumerate(self.twins)]

    # -- lookups --------------------------------------------------------------

    def entities(self) -> Iterator[Entity]:
        yield from self.requirements
        yield from self.subsystems
        yield from self.agents
        yield from self.groups

    def get(self, ident: str) -> Entity | None:
        return self._index.get(ident)

    def __contains__(self, ident: object) -> bool:
        return ident in self._index

    def order(self, ident: str) -> int:
        """Canonical declaration position; unknown ids sort last."""
        return self._order.get(ident, len(self._order))

    def _typed(self, ident: str, cls: type, label: str):
        entity = self._index.get(ident)
        if not isinstance(entity, cls):
            raise NotFound(ident, label)
        return entity

    def requirement(self, ident: str) -> Requirement:
        return self._typed(ident, Requirement, "requirement")

    def subsystem(self, ident: str) -> Subsystem:
        return self._typed(ident, Subsystem, "subsystem")

    def agent(self, ident: str) -> Agent:
        return self._typed(ident, Agent, "agent")

    def group(self, ident: str) -> AgentGroup:
        return self._typed(ident, AgentGroup, "group")

    @property
    def requirements_by_id(self) -> dict[str, Requirement]:
        return {r.id: r for r in self.requirements}

    @property
    def subsystems_by_id(self) -> dict[str, Subsystem]:
        return {s.id: s for s in self.subsystems}

    @property
    def agents_by_id(self) -> dict[str, Agent]:
        return {a.id: a for a in self.agents}

    @property
    def groups_by_id(self) -> dict[str, AgentGroup]:
        return {g.id: g for g in self.groups}

    # -- graph helpers --------------------------------------------------------

    def descendant_groups(self, gid: str) -> set[str]:
        """Groups reachable through membership from ``gid`` (excluding itself)."""
        found: set[str] = set()
        todo = [gid]
        while todo:
            for member in self.group(todo.pop()).members:
                if isinstance(self._index[member], AgentGroup) and member not in found:
                    found.add(member)
                    todo.append(member)
        return found

    def groups_containing(self, ident: str) -> list[AgentGroup]:
        """Every group that transitively contains ``ident``, in declaration order."""
        return [g for g in self.groups if ident != g.id and ident in self.members_closure(g.id)]

    def members_closure(self, gid: str) -> set[str]:
        out: set[str] = set()
        todo = [gid]
        while todo:
            for member in self.group(todo.pop()).members:
                if member not in out:
                    out.add(member)
                    if isinstance(self._index[member], AgentGroup):
                        todo.append(member)
        return out

    def agents_referencing(self, sub_id: str) -> list[Agent]:
        return [a for a in self.agents if sub_id in a.subsystems]

    def controllers(self) -> list[Subsystem]:
        return [s for s in self.subsystems if s.kind.is_controller]

    def pairs_at(self, layer: int = 0) -> list[TwinPair]:
        return [p for p in self.twins if p.layer == layer]


def resolve(model: Model, ident: str) -> Entity:
    """Return the entity of any category named ``ident``."""
    entity = model.get(ident)
    if entity is None:
        raise NotFound(ident)
    return entity


def leaf_agents(model: Model, group: str) -> list[Agent]:
    """Agents transitively inside ``group``, deduplicated, in declaration order."""
    model.group(group)
    out: list[Agent] = []
    seen: set[str] = set()
    path: list[str] = []

    def walk(gid: str) -> None:
        if gid in path:
            raise CyclicMembership(path[path.index(gid):] + [gid])
        path.append(gid)
        for member in model.group(gid).members:
            entity = model.get(member)
            if isinstance(entity, AgentGroup):
                walk(member)
            elif isinstance(entity, Agent) and member not in seen:
                seen.add(member)
                out.append(entity)
        path.pop()

    walk(group)
    return sorted(out, key=lambda a: model.order(a.id))


def controller_refs(model: Model, agent: Agent) -> list[Subsystem]:
    return [s for s in (model.subsystem(r) for r in agent.subsystems) if s.kind.is_controller]


def cont_subsys_of(model: Model, agent: str) -> Subsystem:
    """The unique controller subsystem referenced by ``agent``."""
    found = controller_refs(model, model.agent(agent))
    if not found:
        raise NoController(f"agent '{agent}' references no controller subsystem")
    if len(found) > 1:
        names = ", ".join(s.id for s in found)
        raise MultipleControllers(f"agent '{agent}' references several controllers: {names}")
    return found[0]


def distinct(items: Iterable[str]) -> list[str]:
    """Order-preserving de-duplication."""
    return list(dict.fromkeys(items))
