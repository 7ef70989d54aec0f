"""Well-formedness rules over a parsed model.

Every rule has a stable code. Errors (``E0xx``) make the model unusable for
evaluation; warnings (``W1xx``) flag designs that lower an evaluation factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    Agent,
    AgentKind,
    Config,
    Embodiment,
    GroupKind,
    Model,
    RelKind,
    Requirement,
    ReqRole,
    SpsysError,
    SubsystemKind,
    controller_refs,
    leaf_agents,
)

RULES: dict[str, str] = {
    "E001": "agent must reference exactly one control subsystem",
    "E002": "physical agent references a simulated subsystem",
    "E003": "simulated agent references a physical subsystem",
    "E004": "hybrid agent may reference only one hybrid control subsystem",
    "E005": "mirror endpoints must be a (mirror_sim, mirror_phy) group pair",
    "E006": "functional requirement is not satisfied by any part requirement",
    "E007": "part requirement configuration contradicts its functional source",
    "E008": "malformed world-mirror manage-link",
    "E009": "allocation source is not a hardware requirement",
    "E010": "mirror group contains agents of the wrong embodiment",
    "E011": "requirement relation targets a requirement of the wrong role",
    "E012": "exogenous requirement carries a configuration tag",
    "E013": "cyclic configuration inheritance",
    "W101": "physical agent has no digital twin",
    "W102": "embodiment-specific control subsystem",
    "W103": "twin pair shares no hybrid control subsystem",
    "W104": "real subsystem driven by an embodiment-specific controller",
    "W105": "functional requirement has no configuration; assumed obligatory",
}


@dataclass(frozen=True)
class RuleDiagnostic:
    severity: str
    code: str
    subject: str
    message: str

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def render(self) -> str:
        return f"{self.severity} {self.code} [{self.subject}] {self.message}"

    def to_json(self) -> dict:
        return {"severity": self.severity, "code": self.code, "subject": self.subject,
                "message": self.message}


class ConfigConflict(SpsysError):
    def __init__(self, requirement: str, explicit: Config, inherited: Config) -> None:
        super().__init__(
            f"'{requirement}' is tagged {explicit.value.lower()} but inherits {inherited.value.lower()}"
        )
        self.requirement = requirement


class InheritanceCycle(SpsysError):
    def __init__(self, cycle: list[str]) -> None:
        super().__init__("cyclic refines chain: " + " -> ".join(cycle))
        self.cycle = cycle


@dataclass(frozen=True)
class ValidatedModel:
    model: Model
    resolved_config: dict[str, Config] = field(compare=False)
    diagnostics: tuple[RuleDiagnostic, ...] = field(default=(), compare=False)


@dataclass
class ValidationResult:
    validated: ValidatedModel | None
    diagnostics: list[RuleDiagnostic]

    @property
    def ok(self) -> bool:
        return self.validated is not None

    def __iter__(self):
        yield self.validated
        yield self.diagnostics


def unwrap(model: Model | ValidatedModel) -> Model:
    return model.model if isinstance(model, ValidatedModel) else model


# -- configuration inheritance ------------------------------------------------


@dataclass
class _ConfigOutcome:
    config: dict[str, Config]
    conflicts: list[tuple[str, Config, Config]]
    cycles: list[list[str]]
    defaulted: list[str]


def _functional_refine_cycles(model: Model) -> list[list[str]]:
    reqs = model.requirements_by_id
    cycles: list[list[str]] = []
    done: set[str] = set()
    path: list[str] = []

    def visit(rid: str) -> None:
        if rid in path:
            cycles.append(path[path.index(rid):] + [rid])
            return
        if rid in done:
            return
        path.append(rid)
        for target in reqs[rid].targets(RelKind.REFINES):
            if reqs[target].role.is_functional:
                visit(target)
        path.pop()
        done.add(rid)

    for req in model.requirements:
        if req.role.is_functional:
            visit(req.id)
    return cycles


def _inherit(model: Model) -> _ConfigOutcome:
    reqs = model.requirements_by_id
    out = _ConfigOutcome({}, [], [], [])
    for req in model.requirements:
        if req.role.is_functional:
            if req.config is Config.UNSET:
                out.defaulted.append(req.id)
                out.config[req.id] = Config.OBLIGATORY
            else:
                out.config[req.id] = req.config

    out.cycles += _functional_refine_cycles(model)
    visiting: list[str] = []

    def part(req: Requirement) -> Config:
        if req.id in out.config:
            return out.config[req.id]
        if req.id in visiting:
            cycle = visiting[visiting.index(req.id):] + [req.id]
            out.cycles.append(cycle)
            return Config.OBLIGATORY
        visiting.append(req.id)
        sources: list[Config] = []
        for rel in req.relations:
            target = reqs[rel.target]
            if rel.kind in (RelKind.DERIVES, RelKind.SATISFIES) and target.role.is_functional:
                sources.append(out.config[target.id])
            elif rel.kind is RelKind.REFINES and target.role.is_part:
                sources.append(part(target))
        visiting.pop()
        if not sources:
            inherited = None
        elif Config.OBLIGATORY in sources:
            inherited = Config.OBLIGATORY
        else:
            inherited = Config.OPTIONAL
        if req.config is not Config.UNSET:
            if inherited is not None and inherited is not req.config:
                out.conflicts.append((req.id, req.config, inherited))
            resolved = req.config
        else:
            resolved = inherited or Config.OBLIGATORY
        out.config[req.id] = resolved
        return resolved

    for req in model.requirements:
        if req.role.is_part:
            part(req)
    ordered = {r.id: out.config[r.id] for r in model.requirements if r.id in out.config}
    out.config = ordered
    return out


def resolve_config(model: Model | ValidatedModel) -> dict[str, Config]:
    """Resolved Obligatory/Optional tag for every functional and part requirement.

    Parts inherit from the functional requirements they derive from (and
    from parts they refine). Any obligatory source makes the part
    obligatory; an explicit tag wins but must agree with what is inherited.
    """
    outcome = _inherit(unwrap(model))
    if outcome.cycles:
        raise InheritanceCycle(outcome.cycles[0])
    if outcome.conflicts:
        raise ConfigConflict(*outcome.conflicts[0])
    return outcome.config


# -- rules --------------------------------------------------------------------


class _Checker:
    def __init__(self, model: Model) -> None:
        self.m = model
        self.diags: list[RuleDiagnostic] = []

    def emit(self, code: str, subject: str, message: str | None = None) -> None:
        severity = "error" if code.startswith("E") else "warning"
        self.diags.append(RuleDiagnostic(severity, code, subject, message or RULES[code]))

    def run(self) -> list[RuleDiagnostic]:
        self.agents()
        self.twins()
        self.requirements()
        self.links()
        self.groups()
        self.warnings()
        m = self.m
        return sorted(self.diags, key=lambda d: (d.code, m.order(d.subject)))

    def agents(self) -> None:
        m = self.m
        for agent in m.agents:
            subs = [m.subsystem(r) for r in agent.subsystems]
            conts = [s for s in subs if s.kind.is_controller]
            if len(conts) != 1:
                self.emit("E001", agent.id, f"agent references {len(conts)} control subsystems, expected exactly one")
            if agent.kind is AgentKind.PHYSICAL:
                bad = [s.id for s in subs if s.kind.embodiment is Embodiment.SIMULATED]
                if bad:
                    self.emit("E002", agent.id, "physical agent references simulated subsystems: " + ", ".join(bad))
            elif agent.kind is AgentKind.SIMULATED:
                bad = [s.id for s in subs if s.kind.embodiment is Embodiment.PHYSICAL]
                if bad:
                    self.emit("E003", agent.id, "simulated agent references physical subsystems: " + ", ".join(bad))
            else:
                bad = [s.id for s in subs if s.kind is not SubsystemKind.CONT_HYB]
                if bad:
                    self.emit("E004", agent.id, "hybrid agent references non-hybrid-controller subsystems: " + ", ".join(bad))

    def twins(self) -> None:
        m = self.m
        seen: dict[tuple[str, int], str] = {}
        for pair in m.twins:
            sim, phy = m.group(pair.sim), m.group(pair.phy)
            if sim.kind is not GroupKind.MIRROR_SIM or phy.kind is not GroupKind.MIRROR_PHY:
                self.emit("E005", pair.sim, f"mirror '{sim.id}' <-> '{phy.id}' joins {sim.kind.value} "
                                            f"and {phy.kind.value}, expected MirrorSim and MirrorPhy")
            for gid in dict.fromkeys((pair.sim, pair.phy)):
                key = (gid, pair.layer)
                if key in seen:
                    self.emit("E005", pair.sim, f"group '{gid}' already mirrors '{seen[key]}' at layer {pair.layer}")
                else:
                    seen[key] = pair.phy if gid == pair.sim else pair.sim

    def requirements(self) -> None:
        m = self.m
        reqs = m.requirements_by_id
        satisfied: set[str] = set()
        for req in m.requirements:
            if req.role.is_part:
                satisfied.update(t for t in req.targets(RelKind.DERIVES, RelKind.SATISFIES)
                                 if reqs[t].role.is_functional)
        changed = True
        while changed:
            changed = False
            for req in m.requirements:
                if req.id in satisfied and req.role.is_functional:
                    for t in req.targets(RelKind.REFINES):
                        if reqs[t].role.is_functional and t not in satisfied:
                            satisfied.add(t)
                            changed = True
        for req in m.requirements:
            if req.role.is_functional and req.id not in satisfied:
                self.emit("E006", req.id)
            if req.role.is_part or req.role is ReqRole.HARDWARE:
                for rel in req.relations:
                    if rel.kind is not RelKind.REFINES and not reqs[rel.target].role.is_functional:
                        self.emit("E011", req.id, f"'{rel.kind.value} {rel.target}' must target a functional requirement")
            if req.role is ReqRole.EXOG_AGENT and req.config is not Config.UNSET:
                self.emit("E012", req.id)

        outcome = _inherit(m)
        for rid, explicit, inherited in outcome.conflicts:
            self.emit("E007", rid, f"tagged {explicit.value.lower()} but its functional sources make it "
                                   f"{inherited.value.lower()}")
        for cycle in outcome.cycles:
            self.emit("E013", cycle[0], "cyclic refines chain: " + " -> ".join(cycle))
        for rid in outcome.defaulted:
            self.emit("W105", rid)

    def links(self) -> None:
        m = self.m
        counts: dict[str, int] = {}
        for link in m.manages:
            counts[link.agent] = counts.get(link.agent, 0) + 1
            if m.agent(link.agent).kind is not AgentKind.SIMULATED:
                self.emit("E008", link.agent, f"manage source '{link.agent}' is not a simulated agent")
            if m.requirement(link.exog).role is not ReqRole.EXOG_AGENT:
                self.emit("E008", link.agent, f"manage target '{link.exog}' is not an exogenous requirement")
        for group in m.groups:
            if group.kind is not GroupKind.WORLD_MIRROR:
                continue
            for member in group.members:
                entity = m.get(member)
                if not isinstance(entity, Agent) or entity.kind is not AgentKind.SIMULATED:
                    self.emit("E008", member, f"world-mirror member '{member}' is not a simulated agent")
                elif counts.get(member, 0) != 1:
                    self.emit("E008", member, f"world-mirror member '{member}' has {counts.get(member, 0)} "
                                              "manage-links, expected exactly one")
        for alloc in m.allocations:
            if m.requirement(alloc.hardware).role is not ReqRole.HARDWARE:
                self.emit("E009", alloc.hardware, f"allocation '{alloc.hardware} -> {alloc.target}' "
                                                  "does not start at a hardware requirement")

    def groups(self) -> None:
        m = self.m
        for group in m.groups:
            if group.kind not in (GroupKind.MIRROR_PHY, GroupKind.MIRROR_SIM):
                continue
            kinds = [a.kind for a in leaf_agents(m, group.id)]
            want, banned = AgentKind.PHYSICAL, AgentKind.SIMULATED
            if group.kind is GroupKind.MIRROR_SIM:
                want, banned = banned, want
            if banned in kinds:
                self.emit("E010", group.id, f"{group.kind.value} group contains a {banned.value} agent")
            if want not in kinds:
                self.emit("E010", group.id, f"{group.kind.value} group contains no {want.value} agent")

    def warnings(self) -> None:
        m = self.m
        mirrored = {p.phy for p in m.twins}
        covered: set[str] = set()
        for gid in mirrored:
            if m.group(gid).kind is GroupKind.MIRROR_PHY:
                covered.update(a.id for a in leaf_agents(m, gid))
        for agent in m.agents:
            if agent.kind is AgentKind.PHYSICAL and agent.id not in covered:
                self.emit("W101", agent.id, f"physical agent '{agent.id}' is not mirrored by a digital twin")
        for sub in m.subsystems:
            if sub.kind in (SubsystemKind.CONT_PHY, SubsystemKind.CONT_SIM):
                self.emit("W102", sub.id, f"'{sub.id}' is {sub.kind.value}; a hybrid controller would be shared")
        for pair in m.twins:
            if not shared_hybrid_controllers(m, pair.sim, pair.phy):
                self.emit("W103", pair.sim, f"'{pair.sim}' and '{pair.phy}' share no hybrid control subsystem")
        for sub in m.subsystems:
            if not sub.kind.is_real:
                continue
            for agent in m.agents_referencing(sub.id):
                conts = controller_refs(m, agent)
                if any(c.kind is not SubsystemKind.CONT_HYB for c in conts):
                    self.emit("W104", sub.id, f"'{sub.id}' is driven by embodiment-specific controller "
                                              f"of agent '{agent.id}'")
                    break


def group_controllers(model: Model, gid: str) -> list[str]:
    out: list[str] = []
    for agent in leaf_agents(model, gid):
        for cont in controller_refs(model, agent):
            if cont.id not in out:
                out.append(cont.id)
    return out


def shared_hybrid_controllers(model: Model, sim: str, phy: str) -> list[str]:
    phy_side = set(group_controllers(model, phy))
    return [c for c in group_controllers(model, sim)
            if c in phy_side and model.subsystem(c).kind is SubsystemKind.CONT_HYB]


def validate(model: Model | ValidatedModel) -> ValidationResult:
    """Run every rule; the result carries a :class:`ValidatedModel` iff no errors."""
    base = unwrap(model)
    diags = _Checker(base).run()
    if any(d.is_error for d in diags):
        return ValidationResult(None, diags)
    config = _inherit(base).config
    return ValidationResult(ValidatedModel(base, config, tuple(diags)), diags)
