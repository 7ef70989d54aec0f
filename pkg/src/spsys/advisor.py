"""Improvement findings and what-if edit scripts.

Edit script format, one edit per line (``#`` starts a comment)::

    make_hybrid <cont>
    merge_cont <a> <b> <new>
    add_twin <sim> <phy>
    extract_hyb <new-agent> <cont>
    remove <id>
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field, replace

from .metrics import FactorSet, compute_all, pair_label
from .model import (
    IDENT_RE,
    Agent,
    AgentGroup,
    AgentKind,
    GroupKind,
    Model,
    ModelError,
    SpsysError,
    Subsystem,
    SubsystemKind,
    TwinPair,
    controller_refs,
    leaf_agents,
)
from .parser import implicit_group_id
from .tracer import provenance
from .validator import RuleDiagnostic, ValidatedModel, group_controllers, unwrap, validate


class EditScriptError(SpsysError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class EditPreconditionFailed(SpsysError):
    def __init__(self, index: int, reason: str) -> None:
        super().__init__(f"edit {index}: {reason}")
        self.index = index
        self.reason = reason


class ResultInvalid(SpsysError):
    def __init__(self, index: int, diagnostics: list[RuleDiagnostic]) -> None:
        codes = ", ".join(sorted({d.code for d in diagnostics if d.is_error}))
        super().__init__(f"edit {index} leaves the model invalid ({codes})")
        self.index = index
        self.diagnostics = diagnostics


class _Precondition(Exception):
    pass


def _require(cond: bool, reason: str) -> None:
    if not cond:
        raise _Precondition(reason)


def _controller(m: Model, ident: str) -> Subsystem:
    sub = m.get(ident)
    _require(isinstance(sub, Subsystem) and sub.kind.is_controller, f"'{ident}' is not a control subsystem")
    return sub


def _fresh(m: Model, ident: str) -> None:
    _require(IDENT_RE.match(ident) is not None, f"'{ident}' is not a valid identifier")
    _require(ident not in m, f"identifier '{ident}' is already taken")


@dataclass(frozen=True)
class MakeHybrid:
    cont: str

    def apply(self, m: Model) -> Model:
        sub = _controller(m, self.cont)
        _require(sub.kind is not SubsystemKind.CONT_HYB, f"'{self.cont}' is already hybrid")
        subs = [replace(s, kind=SubsystemKind.CONT_HYB) if s.id == sub.id else s for s in m.subsystems]
        return replace(m, subsystems=subs)

    def render(self) -> str:
        return f"make_hybrid {self.cont}"


@dataclass(frozen=True)
class MergeCont:
    a: str
    b: str
    new: str

    def apply(self, m: Model) -> Model:
        _controller(m, self.a)
        _controller(m, self.b)
        _require(self.a != self.b, "cannot merge a controller with itself")
        _fresh(m, self.new)
        for agent in m.agents:
            _require(not (self.a in agent.subsystems and self.b in agent.subsystems),
                     f"agent '{agent.id}' references both '{self.a}' and '{self.b}'")
        gone = {self.a, self.b}
        agents = [
            replace(a, subsystems=tuple(dict.fromkeys(self.new if r in gone else r for r in a.subsystems)))
            for a in m.agents
        ]
        subs = [s for s in m.subsystems if s.id not in gone] + [Subsystem(self.new, SubsystemKind.CONT_HYB)]
        allocations = [replace(al, target=self.new) if al.target in gone else al for al in m.allocations]
        return replace(m, subsystems=subs, agents=agents, allocations=list(dict.fromkeys(allocations)))

    def render(self) -> str:
        return f"merge_cont {self.a} {self.b} {self.new}"


@dataclass(frozen=True)
class AddTwin:
    """Pair a simulated side with a physical side.

    Either endpoint may be a bare agent, which is wrapped in an implicit
    singleton group. If ``sim`` names nothing yet and ``phy`` is a physical
    agent, a simulated twin agent called ``sim`` is created: it shares the
    physical agent's controller when that is hybrid, else gets a fresh
    simulated controller ``<sim>_Cont``.
    """

    sim: str
    phy: str

    def apply(self, m: Model) -> Model:
        agents, subs, groups = list(m.agents), list(m.subsystems), list(m.groups)
        if self.sim not in m:
            phy = m.get(self.phy)
            _require(isinstance(phy, Agent) and phy.kind is AgentKind.PHYSICAL,
                     f"cannot synthesise a twin for '{self.phy}': not a physical agent")
            _fresh(m, self.sim)
            conts = controller_refs(m, phy)
            if len(conts) == 1 and conts[0].kind is SubsystemKind.CONT_HYB:
                cont = conts[0].id
            else:
                cont = f"{self.sim}_Cont"
                _fresh(m, cont)
                subs.append(Subsystem(cont, SubsystemKind.CONT_SIM))
            agents.append(Agent(self.sim, AgentKind.SIMULATED, (cont,)))
            m = replace(m, agents=agents, subsystems=subs)

        ends = []
        for ident, kind in ((self.sim, GroupKind.MIRROR_SIM), (self.phy, GroupKind.MIRROR_PHY)):
            entity = m.get(ident)
            if isinstance(entity, AgentGroup):
                _require(entity.kind is kind, f"group '{ident}' is {entity.kind.value}, expected {kind.value}")
                ends.append(ident)
            elif isinstance(entity, Agent):
                gid = implicit_group_id(ident)
                if gid not in m:
                    groups.append(AgentGroup(gid, kind, (ident,)))
                else:
                    _require(m.group(gid).kind is kind, f"group '{gid}' is not {kind.value}")
                ends.append(gid)
            else:
                raise _Precondition(f"'{ident}' is neither a group nor an agent")
        pair = TwinPair(*ends)
        _require(pair not in m.twins, f"'{ends[0]}' and '{ends[1]}' are already mirrored")
        return replace(m, groups=groups, twins=[*m.twins, pair])

    def render(self) -> str:
        return f"add_twin {self.sim} {self.phy}"


@dataclass(frozen=True)
class ExtractHybAgent:
    """Wrap a hybrid controller into a new hybrid agent.

    The agent joins both sides of every top-level twin pair whose agents use
    the controller.
    """

    new: str
    cont: str

    def apply(self, m: Model) -> Model:
        sub = _controller(m, self.cont)
        _require(sub.kind is SubsystemKind.CONT_HYB, f"'{self.cont}' is not a hybrid controller")
        _fresh(m, self.new)
        joined: set[str] = set()
        for pair in m.pairs_at(0):
            if self.cont in group_controllers(m, pair.sim) or self.cont in group_controllers(m, pair.phy):
                joined.update((pair.sim, pair.phy))
        agents = [*m.agents, Agent(self.new, AgentKind.HYBRID, (self.cont,))]
        groups = [replace(g, members=(*g.members, self.new)) if g.id in joined else g for g in m.groups]
        return replace(m, agents=agents, groups=groups)

    def render(self) -> str:
        return f"extract_hyb {self.new} {self.cont}"


@dataclass(frozen=True)
class RemoveEntity:
    """Delete an entity and every reference to it.

    Removing an agent also removes the subsystems it owns; a group left
    out of a twin pair drops that pair.
    """

    ident: str

    def apply(self, m: Model) -> Model:
        _require(self.ident in m, f"no entity named '{self.ident}'")
        gone = {self.ident}
        entity = m.get(self.ident)
        if isinstance(entity, Agent):
            gone.update(s.id for s in m.subsystems if s.owner == self.ident)
        reqs = [replace(r, relations=tuple(rel for rel in r.relations if rel.target not in gone))
                for r in m.requirements if r.id not in gone]
        subs = [s for s in m.subsystems if s.id not in gone]
        agents = [replace(a, subsystems=tuple(r for r in a.subsystems if r not in gone))
                  for a in m.agents if a.id not in gone]
        groups = [replace(g, members=tuple(x for x in g.members if x not in gone))
                  for g in m.groups if g.id not in gone]
        return Model(
            m.name, reqs, subs, agents, groups,
            [p for p in m.twins if p.sim not in gone and p.phy not in gone],
            [a for a in m.allocations if a.hardware not in gone and a.target not in gone],
            [x for x in m.manages if x.agent not in gone and x.exog not in gone],
        )

    def render(self) -> str:
        return f"remove {self.ident}"


Edit = MakeHybrid | MergeCont | AddTwin | ExtractHybAgent | RemoveEntity

_EDITS: dict[str, type] = {
    "make_hybrid": MakeHybrid,
    "merge_cont": MergeCont,
    "add_twin": AddTwin,
    "extract_hyb": ExtractHybAgent,
    "remove": RemoveEntity,
}
_ARITY = {"make_hybrid": 1, "merge_cont": 3, "add_twin": 2, "extract_hyb": 2, "remove": 1}


def parse_edit_script(text: str) -> list[Edit]:
    edits: list[Edit] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        words = shlex.split(raw, comments=True)
        if not words:
            continue
        op, args = words[0], words[1:]
        if op not in _EDITS:
            raise EditScriptError(lineno, f"unknown edit '{op}'")
        if len(args) != _ARITY[op]:
            raise EditScriptError(lineno, f"'{op}' takes {_ARITY[op]} argument(s), got {len(args)}")
        edits.append(_EDITS[op](*args))
    return edits


def render_edit_script(edits: list[Edit]) -> str:
    return "".join(e.render() + "\n" for e in edits)


@dataclass(frozen=True)
class DeltaReport:
    before: FactorSet
    after: FactorSet
    per_edit: tuple[tuple[Edit, FactorSet], ...] = ()

    def render(self) -> str:
        lines = ["before:", *_indent(self.before.render())]
        for i, (edit, factors) in enumerate(self.per_edit, 1):
            lines += [f"after edit {i} ({edit.render()}):", *_indent(factors.render())]
        lines += ["delta:"]
        before = dict(self.before.items())
        for name, ratio in self.after.items():
            old = before.get(name)
            old_text = old.render() if old is not None else "absent"
            lines.append(f"  {name}: {old_text} -> {ratio.render()}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {"before": self.before.to_json(), "after": self.after.to_json(),
                "perEdit": [{"edit": e.render(), "factors": f.to_json()} for e, f in self.per_edit]}


def _indent(text: str) -> list[str]:
    return ["  " + line for line in text.splitlines()]


def apply_what_if(model: Model | ValidatedModel, script: list[Edit]) -> tuple[DeltaReport, Model]:
    """Apply ``script`` edit by edit, re-validating and re-evaluating after each.

    Edit indexes in raised errors are 1-based.
    """
    current = unwrap(model)
    before = compute_all(current)
    steps: list[tuple[Edit, FactorSet]] = []
    for index, edit in enumerate(script, 1):
        try:
            current = edit.apply(current)
        except (_Precondition, ModelError) as exc:
            raise EditPreconditionFailed(index, str(exc)) from None
        result = validate(current)
        if not result.ok:
            raise ResultInvalid(index, result.diagnostics)
        steps.append((edit, compute_all(current)))
    after = steps[-1][1] if steps else before
    return DeltaReport(before, after, tuple(steps)), current


# -- findings -----------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    factor: str  # IIF | DGF | DTC | MIF
    subject: str
    action: str
    rationale: str
    edit: Edit | None = field(default=None, compare=False)

    def render(self) -> str:
        text = f"{self.factor} {self.action} [{self.subject}] {self.rationale}"
        if self.edit is not None:
            text += f" (edit: {self.edit.render()})"
        return text

    def to_json(self) -> dict:
        return {"factor": self.factor, "subject": self.subject, "action": self.action,
                "rationale": self.rationale, "edit": self.edit.render() if self.edit else None}


def _free_id(m: Model, base: str, taken: set[str]) -> str:
    base = base.replace(".", "_")
    ident, n = base, 2
    while ident in m or ident in taken:
        ident, n = f"{base}{n}", n + 1
    taken.add(ident)
    return ident


def advise(model: Model | ValidatedModel) -> list[Finding]:
    """Improvement findings, in a fixed order by rule then declaration order."""
    m = unwrap(model)
    findings: list[Finding] = []
    taken: set[str] = set()

    merged: set[str] = set()
    for pair in m.pairs_at(0):
        sim_side = [m.subsystem(c) for c in group_controllers(m, pair.sim)]
        phy_side = [m.subsystem(c) for c in group_controllers(m, pair.phy)]
        sims = [c.id for c in sim_side if c.kind is SubsystemKind.CONT_SIM and c.id not in merged]
        phys = [c.id for c in phy_side if c.kind is SubsystemKind.CONT_PHY and c.id not in merged]
        label = pair_label(m, pair)
        for a, b in zip(sims, phys):
            merged.update((a, b))
            new = _free_id(m, f"{label}Cont", taken)
            findings.append(Finding(
                "IIF", a, "MergeControllers",
                f"W102: '{a}' and '{b}' control the two twins of '{label}'; merge them into one hybrid controller",
                MergeCont(a, b, new)))
    for sub in m.subsystems:
        if sub.kind in (SubsystemKind.CONT_PHY, SubsystemKind.CONT_SIM) and sub.id not in merged:
            findings.append(Finding(
                "IIF", sub.id, "ReclassifyAsHybrid",
                f"W102: '{sub.id}' is {sub.kind.value}; redesign it as an embodiment-independent controller",
                MakeHybrid(sub.id)))

    covered: set[str] = set()
    for pair in m.twins:
        if m.group(pair.phy).kind is GroupKind.MIRROR_PHY:
            covered.update(a.id for a in leaf_agents(m, pair.phy))
    for agent in m.agents:
        if agent.kind is AgentKind.PHYSICAL and agent.id not in covered:
            part = provenance(m, agent.id)
            twin = _free_id(m, f"{part}_Sim" if part else f"{agent.id}_Twin", taken)
            findings.append(Finding(
                "DTC", agent.id, "AddTwinPair",
                f"W101: physical agent '{agent.id}' has no digital twin",
                AddTwin(twin, agent.id)))

    for sub in m.subsystems:
        if not sub.kind.is_real:
            continue
        for agent in m.agents_referencing(sub.id):
            specific = [c for c in controller_refs(m, agent) if c.kind is not SubsystemKind.CONT_HYB]
            if specific:
                findings.append(Finding(
                    "DGF", sub.id, "RedesignDriverInterface",
                    f"W104: '{sub.id}' is driven by '{specific[0].id}'; expose an embodiment-common driver "
                    "interface so a hybrid controller can take over",
                    MakeHybrid(specific[0].id)))
                break

    for pair in m.pairs_at(0):
        sim_hyb = [c for c in group_controllers(m, pair.sim) if m.subsystem(c).kind is SubsystemKind.CONT_HYB]
        phy_hyb = [c for c in group_controllers(m, pair.phy) if m.subsystem(c).kind is SubsystemKind.CONT_HYB]
        if not [c for c in phy_hyb if c not in sim_hyb]:
            continue
        for cont in (c for c in sim_hyb if c not in phy_hyb):
            if any(a.kind is AgentKind.HYBRID for a in m.agents_referencing(cont)):
                continue
            new = _free_id(m, f"{cont}_Agent", taken)
            findings.append(Finding(
                "MIF", cont, "ExtractHybridAgent",
                f"'{pair.sim}' and '{pair.phy}' run separate hybrid controllers; extract '{cont}' as a "
                "hybrid agent shared by both twins (may also change IIF)",
                ExtractHybAgent(new, cont)))
    return findings
