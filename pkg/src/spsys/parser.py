"""Parser for the ``.spsys`` architecture description language.

Parsing runs in two passes. The syntactic pass turns tokens into raw
declarations and recovers at ``;`` / ``}`` boundaries, so independent errors
are all reported. The resolution pass registers identifiers, expands the
``twin`` sugar, checks references and builds the :class:`~spsys.model.Model`.
Neither pass raises: every problem becomes a :class:`ParseDiagnostic`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .model import (
    IDENT_RE,
    Agent,
    AgentGroup,
    AgentKind,
    Allocation,
    Config,
    GroupKind,
    ManageLink,
    Model,
    ModelError,
    Relation,
    RelKind,
    Requirement,
    ReqRole,
    Subsystem,
    SubsystemKind,
    TwinPair,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int  # inclusive

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    span: SourceSpan

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def render(self) -> str:
        return f"{self.severity} {self.code} {self.span} {self.message}"

    def to_json(self) -> dict:
        s = self.span
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "span": {
                "file": s.file,
                "startLine": s.start_line,
                "startCol": s.start_col,
                "endLine": s.end_line,
                "endCol": s.end_col,
            },
        }


P_LEXICAL = "P001"
P_SYNTAX = "P010"
P_STEREOTYPE = "P020"
P_DANGLING = "P100"
P_DUPLICATE = "P101"
P_CYCLE = "P102"
P_MIRROR_REVERSED = "P200"


# -- lexer --------------------------------------------------------------------


class Tok(Enum):
    IDENT = "identifier"
    STRING = "string"
    LBRACE = "'{'"
    RBRACE = "'}'"
    SEMI = "';'"
    COLON = "':'"
    BIARROW = "'<->'"
    ARROW = "'->'"
    EOF = "end of input"


@dataclass(frozen=True)
class Token:
    kind: Tok
    text: str
    line: int
    col: int
    end_line: int
    end_col: int


_PUNCT = [("<->", Tok.BIARROW), ("->", Tok.ARROW), ("{", Tok.LBRACE), ("}", Tok.RBRACE),
          (";", Tok.SEMI), (":", Tok.COLON)]


def _is_ident_start(ch: str) -> bool:
    return ch == "_" or ("a" <= ch <= "z") or ("A" <= ch <= "Z")


def _is_ident_char(ch: str) -> bool:
    return _is_ident_start(ch) or ("0" <= ch <= "9")


class _Lexer:
    def __init__(self, text: str, file: str, diags: list[ParseDiagnostic]) -> None:
        self.text = text
        self.file = file
        self.diags = diags
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _error(self, line: int, col: int, message: str) -> None:
        span = SourceSpan(self.file, line, col, self.line, max(self.col - 1, col))
        self.diags.append(ParseDiagnostic("error", P_LEXICAL, message, span))

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            line, col = self.line, self.col
            if ch in " \t\r\n﻿":
                self._advance()
            elif text.startswith("//", self.pos):
                while self.pos < len(text) and text[self.pos] != "\n":
                    self._advance()
            elif text.startswith("/*", self.pos):
                end = text.find("*/", self.pos + 2)
                if end < 0:
                    self._advance(len(text) - self.pos)
                    self._error(line, col, "unterminated block comment")
                else:
                    self._advance(end + 2 - self.pos)
            elif ch == '"':
                out.append(self._string(line, col))
            elif _is_ident_start(ch):
                out.append(self._ident(line, col))
            else:
                for lexeme, kind in _PUNCT:
                    if text.startswith(lexeme, self.pos):
                        self._advance(len(lexeme))
                        out.append(Token(kind, lexeme, line, col, self.line, self.col - 1))
                        break
                else:
                    self._advance()
                    self._error(line, col, f"unexpected character {ch!r}")
        out.append(Token(Tok.EOF, "", self.line, self.col, self.line, self.col))
        return out

    def _ident(self, line: int, col: int) -> Token:
        start = self.pos
        while True:
            while self.pos < len(self.text) and _is_ident_char(self.text[self.pos]):
                self._advance()
            nxt = self.text[self.pos + 1] if self.pos + 1 < len(self.text) else ""
            if self.pos < len(self.text) and self.text[self.pos] == "." and _is_ident_start(nxt):
                self._advance()
                continue
            break
        return Token(Tok.IDENT, self.text[start:self.pos], line, col, self.line, self.col - 1)

    def _string(self, line: int, col: int) -> Token:
        self._advance()
        chars: list[str] = []
        while True:
            if self.pos >= len(self.text) or self.text[self.pos] == "\n":
                self._error(line, col, "unterminated string literal")
                break
            ch = self.text[self.pos]
            if ch == '"':
                self._advance()
                break
            if ch == "\\":
                esc = self.text[self.pos + 1] if self.pos + 1 < len(self.text) else ""
                if esc in ('"', "\\"):
                    chars.append(esc)
                    self._advance(2)
                    continue
                eline, ecol = self.line, self.col
                self._advance()
                self._error(eline, ecol, f"invalid escape sequence '\\{esc}'")
                continue
            chars.append(ch)
            self._advance()
        return Token(Tok.STRING, "".join(chars), line, col, self.line, self.col - 1)


def tokenize(text: str, file: str = "<input>") -> tuple[list[Token], list[ParseDiagnostic]]:
    diags: list[ParseDiagnostic] = []
    return _Lexer(text, file, diags).tokens(), diags


# -- raw declarations ---------------------------------------------------------


@dataclass
class _Ref:
    text: str
    tok: Token


@dataclass
class _ReqDecl:
    name: _Ref
    role: ReqRole
    config: Config
    relations: list[tuple[RelKind, _Ref]] = field(default_factory=list)


@dataclass
class _SubDecl:
    name: _Ref
    kind: SubsystemKind


@dataclass
class _AgentDecl:
    name: _Ref
    kind: AgentKind
    # ("uses", _Ref) or ("owns", _SubDecl), in source order
    items: list[tuple[str, object]] = field(default_factory=list)


@dataclass
class _GroupDecl:
    name: _Ref
    kind: GroupKind
    members: list[_Ref] = field(default_factory=list)


@dataclass
class _LinkDecl:
    keyword: str  # mirror | twin | manage | allocate
    left: _Ref
    right: _Ref


REQ_KINDS: dict[str, dict[str, ReqRole] | ReqRole] = {
    "functional": {"embodied": ReqRole.FUNCTIONAL_EMBODIED,
                   "computational": ReqRole.FUNCTIONAL_COMPUTATIONAL},
    "part": {"physical": ReqRole.PART_PHYSICAL, "simulated": ReqRole.PART_SIMULATED,
             "hybrid": ReqRole.PART_HYBRID},
    "hardware": ReqRole.HARDWARE,
    "exogenous": ReqRole.EXOG_AGENT,
}
CONFIGS = {"obligatory": Config.OBLIGATORY, "optional": Config.OPTIONAL}
REL_KINDS = {k.value: k for k in RelKind}
SUB_KINDS: dict[str, dict[str, SubsystemKind]] = {
    "cont": {"physical": SubsystemKind.CONT_PHY, "simulated": SubsystemKind.CONT_SIM,
             "hybrid": SubsystemKind.CONT_HYB},
    "virt_rec": {"physical": SubsystemKind.VIRT_REC_PHY, "simulated": SubsystemKind.VIRT_REC_SIM},
    "virt_eff": {"physical": SubsystemKind.VIRT_EFF_PHY, "simulated": SubsystemKind.VIRT_EFF_SIM},
    "real_rec": {"physical": SubsystemKind.REAL_REC_PHY, "simulated": SubsystemKind.REAL_REC_SIM},
    "real_eff": {"physical": SubsystemKind.REAL_EFF_PHY, "simulated": SubsystemKind.REAL_EFF_SIM},
}
AGENT_KINDS = {"physical": AgentKind.PHYSICAL, "simulated": AgentKind.SIMULATED,
               "hybrid": AgentKind.HYBRID}
GROUP_KINDS = {"agents": GroupKind.PLAIN, "world_mirror": GroupKind.WORLD_MIRROR,
               "mirror_phy": GroupKind.MIRROR_PHY, "mirror_sim": GroupKind.MIRROR_SIM,
               "setup": GroupKind.SETUP}


class _SyntaxError(Exception):
    pass


class _Parser:
    def __init__(self, tokens: list[Token], file: str, diags: list[ParseDiagnostic]) -> None:
        self.toks = tokens
        self.file = file
        self.diags = diags
        self.i = 0
        self.name = ""
        self.reqs: list[_ReqDecl] = []
        self.structure: list[object] = []

    # token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def span(self, tok: Token) -> SourceSpan:
        return SourceSpan(self.file, tok.line, tok.col, tok.end_line, tok.end_col)

    def error(self, tok: Token, message: str, code: str = P_SYNTAX) -> _SyntaxError:
        self.diags.append(ParseDiagnostic("error", code, message, self.span(tok)))
        return _SyntaxError()

    def next(self) -> Token:
        tok = self.tok
        if tok.kind is not Tok.EOF:
            self.i += 1
        return tok

    def at(self, kind: Tok, text: str | None = None) -> bool:
        return self.tok.kind is kind and (text is None or self.tok.text == text)

    def expect(self, kind: Tok, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = f"'{text}'" if text else kind.value
            raise self.error(self.tok, f"expected {want}, found {_describe(self.tok)}")
        return self.next()

    def ident(self, what: str = "identifier", qualified: bool = False) -> _Ref:
        tok = self.tok
        if tok.kind is not Tok.IDENT:
            raise self.error(tok, f"expected {what}, found {_describe(tok)}")
        if not qualified and not IDENT_RE.match(tok.text):
            raise self.error(tok, f"qualified name '{tok.text}' not allowed in a declaration")
        self.next()
        return _Ref(tok.text, tok)

    def keyword(self, table: dict, what: str):
        tok = self.tok
        if tok.kind is not Tok.IDENT:
            raise self.error(tok, f"expected {what}, found {_describe(tok)}")
        if tok.text not in table:
            choices = ", ".join(sorted(table))
            raise self.error(tok, f"unknown {what} '{tok.text}' (expected one of: {choices})",
                             P_STEREOTYPE)
        self.next()
        return table[tok.text]

    def synchronize(self) -> None:
        """Skip to the end of the current statement.

        Stops after a ``;``, after a balanced ``{...}`` body, or before an
        unmatched ``}`` that closes the enclosing block.
        """
        depth = 0
        while not self.at(Tok.EOF):
            kind = self.tok.kind
            if kind is Tok.LBRACE:
                depth += 1
            elif kind is Tok.RBRACE:
                if depth == 0:
                    return
                depth -= 1
                if depth == 0:
                    self.next()
                    if self.at(Tok.SEMI):
                        self.next()
                    return
            elif kind is Tok.SEMI and depth == 0:
                self.next()
                return
            self.next()

    def block(self, item) -> None:
        while not self.at(Tok.RBRACE) and not self.at(Tok.EOF):
            start = self.i
            try:
                item()
            except _SyntaxError:
                self.synchronize()
                if self.i == start:
                    self.next()
        self.expect(Tok.RBRACE)

    # grammar

    def parse(self) -> None:
        try:
            self.expect(Tok.IDENT, "model")
            self.name = self.expect(Tok.STRING).text
            self.expect(Tok.LBRACE)
            self.expect(Tok.IDENT, "requirements")
            self.expect(Tok.LBRACE)
            self.block(self.reqdecl)
            self.expect(Tok.IDENT, "structure")
            self.expect(Tok.LBRACE)
            self.block(self.sdecl)
            self.expect(Tok.RBRACE)
            if not self.at(Tok.EOF):
                raise self.error(self.tok, f"unexpected {_describe(self.tok)} after model")
        except _SyntaxError:
            pass

    def reqdecl(self) -> None:
        self.expect(Tok.IDENT, "req")
        name = self.ident("requirement name")
        self.expect(Tok.COLON)
        kind = self.keyword(REQ_KINDS, "requirement kind")
        role = kind if isinstance(kind, ReqRole) else self.keyword(kind, "requirement variant")
        config = Config.UNSET
        if self.at(Tok.IDENT) and self.tok.text in CONFIGS:
            config = CONFIGS[self.next().text]
        elif self.at(Tok.IDENT) and self.tok.text != "req":
            self.keyword(CONFIGS, "configuration")
        decl = _ReqDecl(name, role, config)
        if self.at(Tok.LBRACE):
            self.next()

            def rel() -> None:
                kind = self.keyword(REL_KINDS, "relation")
                target = self.ident("requirement name", qualified=True)
                self.expect(Tok.SEMI)
                decl.relations.append((kind, target))

            self.block(rel)
        if self.at(Tok.SEMI):
            self.next()
        self.reqs.append(decl)

    def subsysdecl(self) -> _SubDecl:
        self.expect(Tok.IDENT, "subsystem")
        name = self.ident("subsystem name")
        self.expect(Tok.COLON)
        variants = self.keyword(SUB_KINDS, "subsystem kind")
        kind = self.keyword(variants, "embodiment")
        self.expect(Tok.SEMI)
        return _SubDecl(name, kind)

    def sdecl(self) -> None:
        tok = self.tok
        word = tok.text if tok.kind is Tok.IDENT else None
        if word == "subsystem":
            self.structure.append(self.subsysdecl())
        elif word == "agent":
            self.agentdecl()
        elif word == "group":
            self.groupdecl()
        elif word in ("mirror", "twin"):
            self.linkdecl(Tok.BIARROW)
        elif word in ("manage", "allocate"):
            self.linkdecl(Tok.ARROW)
        else:
            raise self.error(tok, f"expected a structure declaration, found {_describe(tok)}")

    def agentdecl(self) -> None:
        self.next()
        name = self.ident("agent name")
        self.expect(Tok.COLON)
        decl = _AgentDecl(name, self.keyword(AGENT_KINDS, "agent kind"))
        self.expect(Tok.LBRACE)

        def item() -> None:
            if self.at(Tok.IDENT, "uses"):
                self.next()
                ref = self.ident("subsystem name", qualified=True)
                self.expect(Tok.SEMI)
                decl.items.append(("uses", ref))
            elif self.at(Tok.IDENT, "owns"):
                self.next()
                decl.items.append(("owns", self.subsysdecl()))
            else:
                raise self.error(self.tok, f"expected 'uses' or 'owns', found {_describe(self.tok)}")

        self.block(item)
        self.structure.append(decl)

    def groupdecl(self) -> None:
        self.next()
        name = self.ident("group name")
        self.expect(Tok.COLON)
        decl = _GroupDecl(name, self.keyword(GROUP_KINDS, "group kind"))
        self.expect(Tok.LBRACE)

        def member() -> None:
            self.expect(Tok.IDENT, "member")
            decl.members.append(self.ident("member name"))
            self.expect(Tok.SEMI)

        self.block(member)
        self.structure.append(decl)

    def linkdecl(self, arrow: Tok) -> None:
        keyword = self.next().text
        qualified = keyword == "allocate"
        left = self.ident("identifier")
        self.expect(arrow)
        right = self.ident("identifier", qualified=qualified)
        self.expect(Tok.SEMI)
        self.structure.append(_LinkDecl(keyword, left, right))


def _describe(tok: Token) -> str:
    if tok.kind is Tok.IDENT:
        return f"'{tok.text}'"
    if tok.kind is Tok.STRING:
        return "string literal"
    return tok.kind.value


# -- resolution ---------------------------------------------------------------


class _Resolver:
    def __init__(self, parser: _Parser, diags: list[ParseDiagnostic]) -> None:
        self.p = parser
        self.diags = diags
        self.kinds: dict[str, str] = {}  # id -> category
        self.agent_kinds: dict[str, AgentKind] = {}
        self.group_kinds: dict[str, GroupKind] = {}

    def error(self, tok: Token, code: str, message: str) -> None:
        self.diags.append(ParseDiagnostic("error", code, message, self.p.span(tok)))

    def warn(self, tok: Token, code: str, message: str) -> None:
        self.diags.append(ParseDiagnostic("warning", code, message, self.p.span(tok)))

    def declare(self, ident: str, tok: Token, category: str) -> bool:
        if ident in self.kinds:
            self.error(tok, P_DUPLICATE, f"duplicate identifier '{ident}'")
            return False
        self.kinds[ident] = category
        return True

    def check(self, ref: _Ref, *categories: str) -> bool:
        found = self.kinds.get(ref.text)
        if found is None or found not in categories:
            what = " or ".join(categories)
            self.error(ref.tok, P_DANGLING, f"undeclared {what} '{ref.text}'")
            return False
        return True

    def run(self) -> Model | None:
        p = self.p
        requirements: list[Requirement] = []
        global_subs: list[Subsystem] = []
        owned_subs: list[Subsystem] = []
        agents: list[_AgentDecl] = []
        groups: list[tuple[_GroupDecl, tuple[str, ...] | None]] = []
        links: list[_LinkDecl] = []

        for req in p.reqs:
            self.declare(req.name.text, req.name.tok, "requirement")
        for decl in p.structure:
            if isinstance(decl, _AgentDecl):
                self.agent_kinds.setdefault(decl.name.text, decl.kind)
        for decl in p.structure:
            if isinstance(decl, _SubDecl):
                if self.declare(decl.name.text, decl.name.tok, "subsystem"):
                    global_subs.append(Subsystem(decl.name.text, decl.kind))
            elif isinstance(decl, _AgentDecl):
                if self.declare(decl.name.text, decl.name.tok, "agent"):
                    agents.append(decl)
                for tag, item in decl.items:
                    if tag == "owns":
                        qualified = f"{decl.name.text}.{item.name.text}"
                        if self.declare(qualified, item.name.tok, "subsystem"):
                            owned_subs.append(Subsystem(qualified, item.kind, decl.name.text))
            elif isinstance(decl, _GroupDecl):
                if self.declare(decl.name.text, decl.name.tok, "group"):
                    self.group_kinds[decl.name.text] = decl.kind
                    groups.append((decl, None))
            elif decl.keyword == "twin":
                links.append(decl)
                self._twin_groups(decl, groups)
            else:
                links.append(decl)

        for req in p.reqs:
            rels = []
            for kind, target in req.relations:
                if self.check(target, "requirement"):
                    rels.append(Relation(kind, target.text))
            requirements.append(Requirement(req.name.text, req.role, req.config, tuple(rels)))

        built_agents: list[Agent] = []
        for decl in agents:
            refs: list[str] = []
            for tag, item in decl.items:
                if tag == "owns":
                    ref = f"{decl.name.text}.{item.name.text}"
                    tok = item.name.tok
                elif self.check(item, "subsystem"):
                    ref, tok = item.text, item.tok
                else:
                    continue
                if ref in refs:
                    self.error(tok, P_DUPLICATE, f"agent '{decl.name.text}' already uses '{ref}'")
                else:
                    refs.append(ref)
            built_agents.append(Agent(decl.name.text, decl.kind, tuple(refs)))

        built_groups: list[AgentGroup] = []
        for decl, implicit in groups:
            if implicit is not None:
                built_groups.append(AgentGroup(decl.name.text, decl.kind, implicit))
                continue
            members: list[str] = []
            for ref in decl.members:
                if not self.check(ref, "agent", "group"):
                    continue
                if ref.text in members:
                    self.error(ref.tok, P_DUPLICATE, f"group '{decl.name.text}' already lists '{ref.text}'")
                else:
                    members.append(ref.text)
            built_groups.append(AgentGroup(decl.name.text, decl.kind, tuple(members)))

        twins: list[TwinPair] = []
        allocations: list[Allocation] = []
        manages: list[ManageLink] = []
        for link in links:
            if link.keyword == "mirror":
                pair = self._mirror(link)
                if pair:
                    twins.append(pair)
            elif link.keyword == "twin":
                pair = self._twin(link)
                if pair:
                    twins.append(pair)
            elif link.keyword == "manage":
                ok = self.check(link.left, "agent") & self.check(link.right, "requirement")
                if ok:
                    manages.append(ManageLink(link.left.text, link.right.text))
            else:
                ok = self.check(link.left, "requirement") & self.check(link.right, "agent", "subsystem")
                if ok:
                    allocations.append(Allocation(link.left.text, link.right.text))

        if any(d.is_error for d in self.diags):
            return None
        try:
            return Model(p.name, requirements, global_subs + owned_subs, built_agents,
                         built_groups, twins, allocations, manages)
        except ModelError as exc:
            tok = p.toks[0]
            code = P_CYCLE if "cyclic" in str(exc) else P_SYNTAX
            for decl, _ in groups:
                if getattr(exc, "cycle", None) and decl.name.text == exc.cycle[0]:
                    tok = decl.name.tok
            self.error(tok, code, str(exc))
            return None

    def _twin_groups(self, link: _LinkDecl, groups: list) -> None:
        """Register the implicit singleton groups created by ``twin A <-> B``."""
        for ref in (link.left, link.right):
            kind = self.agent_kinds.get(ref.text)
            if kind is None:
                continue
            gid = implicit_group_id(ref.text)
            if gid in self.kinds:
                continue
            gkind = _twin_side_kind(kind, first=ref is link.left)
            self.kinds[gid] = "group"
            self.group_kinds[gid] = gkind
            groups.append((_GroupDecl(_Ref(gid, ref.tok), gkind), (ref.text,)))

    def _twin(self, link: _LinkDecl) -> TwinPair | None:
        ok = self.check(link.left, "agent") & self.check(link.right, "agent")
        if not ok:
            return None
        sim, phy = implicit_group_id(link.left.text), implicit_group_id(link.right.text)
        if self.group_kinds.get(sim) == GroupKind.MIRROR_PHY and self.group_kinds.get(phy) == GroupKind.MIRROR_SIM:
            self.warn(link.left.tok, P_MIRROR_REVERSED,
                      f"twin declared physical side first; read as '{link.right.text} <-> {link.left.text}'")
            sim, phy = phy, sim
        return TwinPair(sim, phy)

    def _mirror(self, link: _LinkDecl) -> TwinPair | None:
        ok = self.check(link.left, "group") & self.check(link.right, "group")
        if not ok:
            return None
        left, right = link.left.text, link.right.text
        if self.group_kinds[left] == GroupKind.MIRROR_PHY and self.group_kinds[right] == GroupKind.MIRROR_SIM:
            self.warn(link.left.tok, P_MIRROR_REVERSED,
                      f"mirror declared physical side first; read as '{right} <-> {left}'")
            left, right = right, left
        return TwinPair(left, right)


def implicit_group_id(agent: str) -> str:
    return f"{agent}__grp"


def _twin_side_kind(kind: AgentKind, first: bool) -> GroupKind:
    if kind is AgentKind.SIMULATED:
        return GroupKind.MIRROR_SIM
    if kind is AgentKind.PHYSICAL:
        return GroupKind.MIRROR_PHY
    return GroupKind.MIRROR_SIM if first else GroupKind.MIRROR_PHY


@dataclass
class ParseResult:
    model: Model | None
    diagnostics: list[ParseDiagnostic]

    @property
    def ok(self) -> bool:
        return self.model is not None

    def __iter__(self):
        yield self.model
        yield self.diagnostics


def parse(source: str, file_name: str = "<input>") -> ParseResult:
    """Parse ``.spsys`` text; never raises on malformed input."""
    tokens, diags = tokenize(source, file_name)
    parser = _Parser(tokens, file_name, diags)
    parser.parse()
    if any(d.is_error for d in diags):
        return ParseResult(None, diags)
    model = _Resolver(parser, diags).run()
    return ParseResult(model, diags)


def parse_file(path) -> ParseResult:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))
