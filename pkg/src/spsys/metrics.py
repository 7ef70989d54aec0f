"""Integrity factors of an architecture as exact count ratios.

* IIF: hybrid controllers over all controllers, system-wide.
* DGF: Real subsystems driven by a hybrid-controlled agent over all Real subsystems.
* DTC: Physical agents inside a mirrored MirrorPhy group over all Physical agents.
* MIF: hybrid controllers over all controllers of one digital twin.

Shared subsystems are counted once. Ratios keep their unreduced counts
(``20/22`` stays ``20/22``); a zero denominator means the factor is undefined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .model import AgentKind, GroupKind, Model, SpsysError, SubsystemKind, TwinPair, controller_refs, leaf_agents
from .validator import ValidatedModel, group_controllers, unwrap


class UnknownPair(SpsysError):
    pass


@dataclass(frozen=True)
class Ratio:
    numerator: int
    denominator: int

    @property
    def defined(self) -> bool:
        return self.denominator > 0

    @property
    def value(self) -> Fraction | None:
        return Fraction(self.numerator, self.denominator) if self.defined else None

    def rounded(self) -> str:
        """Two-decimal rendering with half-up rounding, or ``n/a``."""
        if not self.defined:
            return "n/a"
        hundredths = (200 * self.numerator + self.denominator) // (2 * self.denominator)
        return f"{hundredths // 100}.{hundredths % 100:02d}"

    def render(self) -> str:
        if not self.defined:
            return "n/a"
        return f"{self.numerator}/{self.denominator} (= {self.rounded()})"

    def to_json(self) -> dict:
        return {"numerator": self.numerator, "denominator": self.denominator,
                "defined": self.defined, "rounded": self.rounded() if self.defined else None}


@dataclass(frozen=True)
class FactorSet:
    iif: Ratio
    dgf: Ratio
    dtc: Ratio
    mif: dict[str, Ratio] = field(default_factory=dict)

    def items(self) -> list[tuple[str, Ratio]]:
        out = [("IIF", self.iif)]
        out += [(f"MIF_{name}", r) for name, r in self.mif.items()]
        out += [("DGF", self.dgf), ("DTC", self.dtc)]
        return out

    def undefined(self) -> list[str]:
        return [name for name, r in self.items() if not r.defined]

    def render(self) -> str:
        return "\n".join(f"{name} = {r.render()}" for name, r in self.items())

    def to_json(self) -> dict:
        return {"IIF": self.iif.to_json(), "DGF": self.dgf.to_json(), "DTC": self.dtc.to_json(),
                "MIF": {name: r.to_json() for name, r in self.mif.items()}}


def compute_iif(model: Model | ValidatedModel) -> Ratio:
    m = unwrap(model)
    conts = m.controllers()
    hybrid = [c for c in conts if c.kind is SubsystemKind.CONT_HYB]
    return Ratio(len(hybrid), len(conts))


def compute_dgf(model: Model | ValidatedModel) -> Ratio:
    m = unwrap(model)
    reals = [s for s in m.subsystems if s.kind.is_real]
    governed = set()
    for agent in m.agents:
        if any(c.kind is SubsystemKind.CONT_HYB for c in controller_refs(m, agent)):
            governed.update(agent.subsystems)
    return Ratio(sum(1 for s in reals if s.id in governed), len(reals))


def mirrored_physical_agents(model: Model) -> list[str]:
    """Physical agents transitively inside a MirrorPhy group that has a twin."""
    covered: set[str] = set()
    for pair in model.twins:
        if model.group(pair.phy).kind is GroupKind.MIRROR_PHY:
            covered.update(a.id for a in leaf_agents(model, pair.phy))
    return [a.id for a in model.agents if a.kind is AgentKind.PHYSICAL and a.id in covered]


def compute_dtc(model: Model | ValidatedModel) -> Ratio:
    m = unwrap(model)
    physical = [a for a in m.agents if a.kind is AgentKind.PHYSICAL]
    return Ratio(len(mirrored_physical_agents(m)), len(physical))


def compute_mif(model: Model | ValidatedModel, pair: TwinPair | str) -> Ratio:
    """Controller integrity inside the digital-twin side of a top-level pair.

    ``pair`` is a :class:`TwinPair` or a pair label as used in reports.
    """
    m = unwrap(model)
    found = _find_pair(m, pair)
    conts = [m.subsystem(c) for c in group_controllers(m, found.sim)]
    return Ratio(sum(1 for c in conts if c.kind is SubsystemKind.CONT_HYB), len(conts))


def _find_pair(m: Model, pair: TwinPair | str) -> TwinPair:
    for candidate in m.pairs_at(0):
        if candidate == pair or pair_label(m, candidate) == pair:
            return candidate
    raise UnknownPair(f"no top-level twin pair {pair!r}")


def pair_union_integrity(model: Model | ValidatedModel, pair: TwinPair | str) -> Ratio:
    """Like MIF but over both twins; for diagnosis only, never reported as MIF."""
    m = unwrap(model)
    found = _find_pair(m, pair)
    ids = group_controllers(m, found.sim)
    ids += [c for c in group_controllers(m, found.phy) if c not in ids]
    conts = [m.subsystem(c) for c in ids]
    return Ratio(sum(1 for c in conts if c.kind is SubsystemKind.CONT_HYB), len(conts))


def compute_all(model: Model | ValidatedModel) -> FactorSet:
    m = unwrap(model)
    mif: dict[str, Ratio] = {}
    for pair in m.pairs_at(0):
        label = pair_label(m, pair)
        mif[pair.sim if label in mif else label] = compute_mif(m, pair)
    return FactorSet(compute_iif(m), compute_dgf(m), compute_dtc(m), mif)


def pair_label(model: Model, pair: TwinPair) -> str:
    """Report name of a twin pair: its part requirement if recognisable, else the DT group id."""
    from .tracer import provenance

    for gid in (pair.sim, pair.phy):
        part = provenance(model, gid)
        if part is not None:
            return part
    return pair.sim
