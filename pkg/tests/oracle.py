"""Brute-force recount of the integrity factors.

Works only from the raw entity tuples of a model and deliberately avoids the
library's graph helpers, so it can serve as an independent check.
"""

from __future__ import annotations

import itertools

HYB = "ContHyb"
CONTS = {"ContHyb", "ContPhy", "ContSim"}
REALS = {"RealRecPhy", "RealRecSim", "RealEffPhy", "RealEffSim"}


def _kinds(model) -> dict[str, str]:
    return {s.id: s.kind.value for s in model.subsystems}


def _agents_under(model, gid: str) -> set[str]:
    members = {g.id: set(g.members) for g in model.groups}
    agents = {a.id for a in model.agents}
    reached = {gid}
    changed = True
    while changed:
        changed = False
        for g in list(reached):
            for m in members.get(g, ()):
                if m not in reached:
                    reached.add(m)
                    changed = True
    return reached & agents


def _top_level_pairs(model) -> list:
    out = []
    for pair in model.twins:
        inside_other = False
        for other in model.twins:
            if other is pair:
                continue
            for side in (other.sim, other.phy):
                reach = set()
                frontier = [side]
                while frontier:
                    g = frontier.pop()
                    for grp in model.groups:
                        if grp.id == g:
                            for m in grp.members:
                                if m not in reach:
                                    reach.add(m)
                                    frontier.append(m)
                if pair.sim in reach or pair.phy in reach:
                    inside_other = True
        if not inside_other:
            out.append(pair)
    return out


def iif(model) -> tuple[int, int]:
    kinds = _kinds(model)
    conts = [k for k in kinds.values() if k in CONTS]
    return sum(k == HYB for k in conts), len(conts)


def dgf(model) -> tuple[int, int]:
    kinds = _kinds(model)
    reals = {s for s, k in kinds.items() if k in REALS}
    good = set()
    for agent in model.agents:
        if any(kinds[s] == HYB for s in agent.subsystems):
            good |= set(agent.subsystems) & reals
    return len(good), len(reals)


def dtc(model) -> tuple[int, int]:
    physical = {a.id for a in model.agents if a.kind.value == "Physical"}
    kinds = {g.id: g.kind.value for g in model.groups}
    mirrored = set()
    for pair in model.twins:
        if kinds[pair.phy] == "MirrorPhy":
            mirrored |= _agents_under(model, pair.phy) & physical
    return len(mirrored), len(physical)


def mif(model) -> list[tuple[int, int]]:
    kinds = _kinds(model)
    by_id = {a.id: a for a in model.agents}
    out = []
    for pair in _top_level_pairs(model):
        conts = {s for a in _agents_under(model, pair.sim) for s in by_id[a].subsystems if kinds[s] in CONTS}
        out.append((sum(kinds[c] == HYB for c in conts), len(conts)))
    return out


def setup_selections(parts: list[tuple[str, str, bool]]) -> list[dict[str, str]]:
    """Every legal assignment vector for ``(part id, role, optional)`` triples."""
    legal = {"PartHybrid": {"phy", "sim"}, "PartPhysical": {"phy"}, "PartSimulated": {"sim"}}
    out = []
    for vector in itertools.product(("phy", "sim", "absent"), repeat=len(parts)):
        ok = all(v in legal[role] or (v == "absent" and optional) for v, (_, role, optional) in zip(vector, parts))
        if ok:
            out.append({pid: v for v, (pid, _, _) in zip(vector, parts)})
    return out
