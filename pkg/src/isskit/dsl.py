"""The ``.iss`` model/norm/policy language.

Example::

    agents A B;
    resources money;
    states q0* q1;
    actions go stay;
    avail q0 A {go,stay};
    avail q0 B stay;
    cost q0 A go = [1];
    outcome q0 (go,_) -> q1;
    outcome q0 (_,_) -> q0;
    ...
    norm N {
      state ok ok init;
      state bad violation;
      start q1 -> bad;
      on ok: q0 / (go,_) -> bad;
      on _ / _ -> _;
    }
    policy sanction money sv=5;
    policy repair cv=2 sv=5 w=1 action=pay;

Statements end with ``;`` and may appear in any order; ``#`` starts a comment.
``_`` is a wildcard in patterns and, as a rule target, means "stay".  Outcome
entries and norm rules are first-match-wins in document order.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .coordination import ReparationPolicy, SanctionPolicy, check_repair_payment
from .errors import DslError, InvalidPolicy, ModelValidationError
from .model import Model, RawModel, validate_model
from .norms import STAY, NonTotalMonitor, NormMonitor, Rule, StartRule, Status, compile_monitor


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    length: int = 1
    file: str = "<input>"

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: Span
    hint: str | None = None

    def __str__(self) -> str:
        text = f"{self.span}: {self.severity}[{self.code}]: {self.message}"
        if self.hint:
            text += f" (expected {self.hint})"
        return text


class Ident(str):
    """An identifier that remembers where it was written; compares as ``str``."""

    span: Span

    def __new__(cls, text: str, span: Span | None = None):
        obj = super().__new__(cls, text)
        obj.span = span or Span(0, 0, len(text))
        return obj

    def __reduce__(self):
        return (Ident, (str(self), self.span))


def _nospan():
    return field(default=None, compare=False, repr=False)


@dataclass
class StateDecl:
    name: Ident
    initial: bool = False


@dataclass
class AvailEntry:
    state: Ident
    agent: Ident
    actions: tuple[Ident, ...]
    span: Span | None = _nospan()


@dataclass
class CostEntry:
    state: Ident
    agent: Ident
    action: Ident
    vector: tuple[int, ...]
    span: Span | None = _nospan()


@dataclass
class OutcomeEntry:
    # one element per agent: None is the wildcard, otherwise the allowed names
    state: Ident
    pattern: tuple
    target: Ident
    span: Span | None = _nospan()


@dataclass
class MonitorStateDecl:
    name: Ident
    status: str
    initial: bool = False


@dataclass
class NormRule:
    source: tuple | None
    states: tuple | None
    action: tuple | None
    target: Ident | None
    span: Span | None = _nospan()


@dataclass
class StartRuleDecl:
    states: tuple | None
    target: Ident
    span: Span | None = _nospan()


@dataclass
class NormBlock:
    name: Ident
    states: list[MonitorStateDecl] = field(default_factory=list)
    starts: list[StartRuleDecl] = field(default_factory=list)
    rules: list[NormRule] = field(default_factory=list)
    span: Span | None = _nospan()


@dataclass
class PolicyDecl:
    kind: str
    params: tuple[tuple[str, object], ...]
    span: Span | None = _nospan()

    def get(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default


@dataclass
class Document:
    agents: list[Ident] = field(default_factory=list)
    resources: list[Ident] = field(default_factory=list)
    states: list[StateDecl] = field(default_factory=list)
    actions: list[Ident] = field(default_factory=list)
    avail: list[AvailEntry] = field(default_factory=list)
    costs: list[CostEntry] = field(default_factory=list)
    outcomes: list[OutcomeEntry] = field(default_factory=list)
    norms: list[NormBlock] = field(default_factory=list)
    policies: list[PolicyDecl] = field(default_factory=list)
    sections: dict = field(default_factory=dict, compare=False, repr=False)


# -- lexer ------------------------------------------------------------------

_LEX = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<arrow>->)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>\d+)"
    r"|(?P<punct>[;,{}()\[\]=*/:])"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: Span


def tokenize(text: str, file: str = "<input>") -> tuple[list[Token], list[Diagnostic]]:
    tokens, diags = [], []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        mt = _LEX.match(text, pos)
        if mt is None:
            diags.append(
                Diagnostic("error", "LexError", f"unexpected character {text[pos]!r}", Span(line, col, 1, file))
            )
            pos += 1
            col += 1
            continue
        kind = mt.lastgroup
        val = mt.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append(Token(kind, val, Span(line, col, len(val), file)))
            col += len(val)
        pos = mt.end()
    tokens.append(Token("eof", "", Span(line, col, 0, file)))
    return tokens, diags


# -- parser -----------------------------------------------------------------


class _Bail(Exception):
    pass


_STATUSES = ("ok", "violation", "pending")
_POLICY_KEYS = {
    "sanction": {"money", "sv", "norm", "mode"},
    "repair": {"cv", "sv", "w", "action", "money", "norm"},
}


class _Parser:
    def __init__(self, tokens: list[Token], diags: list[Diagnostic]):
        self.toks = tokens
        self.pos = 0
        self.diags = diags
        self.doc = Document()

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def fail(self, hint: str, tok: Token | None = None):
        tok = tok or self.peek()
        found = repr(tok.text) if tok.kind != "eof" else "end of input"
        self.diags.append(Diagnostic("error", "ParseError", f"unexpected {found}", tok.span, hint))
        raise _Bail

    def take(self, kind: str, text: str | None = None, hint: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            self.fail(hint or repr(text or kind))
        self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind in ("punct", "arrow") and tok.text == text

    def ident(self, hint: str = "identifier", allow_wild: bool = False) -> Ident:
        tok = self.take("ident", hint=hint)
        if tok.text == "_" and not allow_wild:
            self.fail(hint, tok)
        return Ident(tok.text, tok.span)

    def recover(self, stop=(";",)):
        """Skip to the end of the broken statement (or block)."""
        depth = 0
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text == "}" and depth == 0 and "}" in stop:
                return
            self.pos += 1
            if tok.text == "{":
                depth += 1
            elif tok.text == "}" and depth > 0:
                depth -= 1
                if depth == 0:
                    return
            elif tok.text == ";" and depth == 0:
                return

    # grammar
    def document(self) -> Document:
        while self.peek().kind != "eof":
            start = self.pos
            try:
                self.statement()
            except _Bail:
                if self.pos == start:
                    self.pos += 1
                self.recover()
        return self.doc

    def statement(self):
        tok = self.take("ident", hint="a statement keyword")
        kw = tok.text
        doc = self.doc
        if kw in ("agents", "resources", "actions"):
            names = []
            while self.peek().kind == "ident":
                names.append(self.ident())
            self.take("punct", ";")
            getattr(doc, kw).extend(names)
            doc.sections.setdefault(kw, tok.span)
        elif kw == "states":
            while self.peek().kind == "ident":
                name = self.ident("state name")
                star = self.at("*")
                if star:
                    self.pos += 1
                doc.states.append(StateDecl(name, star))
            self.take("punct", ";")
            doc.sections.setdefault("states", tok.span)
        elif kw == "avail":
            q, a = self.ident("state name"), self.ident("agent name")
            acts = self.name_set("action set")
            self.take("punct", ";")
            doc.avail.append(AvailEntry(q, a, acts, tok.span))
        elif kw == "cost":
            q, a, x = self.ident("state name"), self.ident("agent name"), self.ident("action name")
            self.take("punct", "=")
            vec = self.int_vector()
            self.take("punct", ";")
            doc.costs.append(CostEntry(q, a, x, vec, tok.span))
        elif kw == "outcome":
            q = self.ident("state name")
            pat = self.action_pattern(allow_wild=False)
            self.take("arrow", "->", "'->'")
            t = self.ident("target state")
            self.take("punct", ";")
            doc.outcomes.append(OutcomeEntry(q, pat, t, tok.span))
        elif kw == "norm":
            self.norm_block(tok)
        elif kw == "policy":
            self.policy(tok)
        else:
            self.fail("agents, resources, states, actions, avail, cost, outcome, norm or policy", tok)

    def name_set(self, hint: str) -> tuple[Ident, ...]:
        if self.at("{"):
            self.pos += 1
            names = []
            if not self.at("}"):
                names.append(self.ident(hint))
                while self.at(","):
                    self.pos += 1
                    names.append(self.ident(hint))
            self.take("punct", "}", hint="'}' or ','")
            return tuple(names)
        return (self.ident(hint),)

    def pattern(self, hint: str):
        if self.peek().kind == "ident" and self.peek().text == "_":
            self.pos += 1
            return None
        return self.name_set(hint)

    def action_pattern(self, allow_wild: bool = True):
        if allow_wild and self.peek().text == "_":
            self.pos += 1
            return None
        self.take("punct", "(", hint="'(' joint action pattern")
        elems = [self.pattern("action name, '_' or set")]
        while self.at(","):
            self.pos += 1
            elems.append(self.pattern("action name, '_' or set"))
        self.take("punct", ")", hint="')' or ','")
        return tuple(elems)

    def int_vector(self) -> tuple[int, ...]:
        self.take("punct", "[", hint="'[' cost vector")
        vals = []
        if not self.at("]"):
            vals.append(int(self.take("int", hint="non-negative integer").text))
            while self.at(","):
                self.pos += 1
                vals.append(int(self.take("int", hint="non-negative integer").text))
        self.take("punct", "]", hint="']' or ','")
        return tuple(vals)

    def norm_block(self, kw: Token):
        name = self.ident("norm name")
        block = NormBlock(name, span=kw.span)
        self.take("punct", "{", hint="'{'")
        while not self.at("}"):
            if self.peek().kind == "eof":
                self.fail("'}' closing norm block")
            start = self.pos
            try:
                self.norm_statement(block)
            except _Bail:
                if self.pos == start:
                    self.pos += 1
                self.recover(stop=(";", "}"))
        self.take("punct", "}")
        self.doc.norms.append(block)

    def norm_statement(self, block: NormBlock):
        tok = self.take("ident", hint="state, start or on")
        if tok.text == "state":
            name = self.ident("monitor state name")
            status = self.take("ident", hint="ok, violation or pending")
            if status.text not in _STATUSES:
                self.fail("ok, violation or pending", status)
            init = False
            if self.peek().kind == "ident" and self.peek().text == "init":
                self.pos += 1
                init = True
            self.take("punct", ";")
            block.states.append(MonitorStateDecl(name, status.text, init))
        elif tok.text == "start":
            states = self.pattern("state pattern")
            self.take("arrow", "->", "'->'")
            target = self.ident("monitor state")
            self.take("punct", ";")
            block.starts.append(StartRuleDecl(states, target, tok.span))
        elif tok.text == "on":
            first = self.pattern("monitor or model state pattern")
            source = None
            if self.at(":"):
                self.pos += 1
                source = first
                states = self.pattern("model state pattern")
            else:
                states = first
            self.take("punct", "/", hint="'/'")
            action = self.action_pattern()
            self.take("arrow", "->", "'->'")
            target = self.ident("monitor state or '_'", allow_wild=True)
            self.take("punct", ";")
            block.rules.append(
                NormRule(source, states, action, None if target == "_" else target, tok.span)
            )
        else:
            self.fail("state, start or on", tok)

    def policy(self, kw: Token):
        kind = self.take("ident", hint="sanction or repair")
        if kind.text not in _POLICY_KEYS:
            self.fail("sanction or repair", kind)
        params = []
        if kind.text == "sanction" and self.peek().kind == "ident" and self.peek(1).text != "=":
            params.append(("money", self.ident("money resource")))
        while self.peek().kind == "ident":
            key = self.ident("parameter name")
            self.take("punct", "=", hint="'='")
            if self.peek().kind == "int":
                val = int(self.take("int").text)
            else:
                val = self.ident("parameter value")
            params.append((str(key), val))
            if key not in _POLICY_KEYS[kind.text]:
                self.diags.append(
                    Diagnostic(
                        "error", "ParseError", f"unknown {kind.text} parameter {key!r}", key.span,
                        ", ".join(sorted(_POLICY_KEYS[kind.text])),
                    )
                )
        self.take("punct", ";")
        self.doc.policies.append(PolicyDecl(kind.text, tuple(params), kw.span))


# -- resolution -------------------------------------------------------------


def _resolve(doc: Document, diags: list[Diagnostic]) -> None:
    def err(code, msg, span, hint=None):
        diags.append(Diagnostic("error", code, msg, span, hint))

    def declare(names: Iterable[Ident], what: str) -> set[str]:
        seen: set[str] = set()
        for n in names:
            if n in seen:
                err("DuplicateDefinition", f"{what} {n!r} declared twice", n.span)
            seen.add(n)
        return seen

    agents = declare(doc.agents, "agent")
    resources = declare(doc.resources, "resource")
    states = declare([s.name for s in doc.states], "state")
    actions = declare(doc.actions, "action")
    for what, sec in (("agents", agents), ("states", states), ("actions", actions)):
        if not sec:
            span = doc.sections.get(what, Span(1, 1, 0))
            err("ParseError", f"no {what} declared", span, f"an '{what}' statement")
    if doc.states and not any(s.initial for s in doc.states):
        err("NoInitialState", "mark at least one state initial with '*'", doc.sections["states"])

    def known(name: Ident, pool: set[str], what: str):
        if name not in pool:
            err("UnknownIdentifier", f"undeclared {what} {name!r}", name.span, f"a declared {what}")

    def known_all(names, pool, what):
        for n in names or ():
            known(n, pool, what)

    seen = set()
    for e in doc.avail:
        known(e.state, states, "state")
        known(e.agent, agents, "agent")
        known_all(e.actions, actions, "action")
        if (e.state, e.agent) in seen:
            err("DuplicateDefinition", f"availability of {e.agent} at {e.state} given twice", e.span)
        seen.add((e.state, e.agent))
    seen = set()
    for e in doc.costs:
        known(e.state, states, "state")
        known(e.agent, agents, "agent")
        known(e.action, actions, "action")
        if (e.state, e.agent, e.action) in seen:
            err("DuplicateDefinition", f"cost of {e.agent}:{e.action} at {e.state} given twice", e.span)
        seen.add((e.state, e.agent, e.action))
        if len(e.vector) != len(doc.resources):
            err("BadCostVector", f"cost vector has {len(e.vector)} entries, {len(doc.resources)} resources declared", e.span)
    seen = set()
    for e in doc.outcomes:
        known(e.state, states, "state")
        known(e.target, states, "state")
        for elem in e.pattern:
            known_all(elem, actions, "action")
        if len(e.pattern) != len(doc.agents):
            err("ParseError", f"joint action has {len(e.pattern)} components, {len(doc.agents)} agents declared", e.span)
        key = (e.state, e.pattern)
        if key in seen:
            err("DuplicateDefinition", f"outcome {e.state} {e.pattern} given twice", e.span)
        seen.add(key)

    norm_names = set()
    for block in doc.norms:
        if block.name in norm_names:
            err("DuplicateDefinition", f"norm {block.name!r} declared twice", block.name.span)
        norm_names.add(block.name)
        mstates = declare([s.name for s in block.states], "monitor state")
        inits = [s for s in block.states if s.initial]
        if len(inits) != 1:
            err("MonitorError", f"norm {block.name} needs exactly one init state", block.name.span)
        if not any(s.status == "ok" for s in block.states):
            err("MonitorError", f"norm {block.name} needs an ok state", block.name.span)
        for r in block.starts:
            known_all(r.states, states, "state")
            known(r.target, mstates, "monitor state")
        for r in block.rules:
            known_all(r.source, mstates, "monitor state")
            known_all(r.states, states, "state")
            if r.action is not None:
                if len(r.action) != len(doc.agents):
                    err("ParseError", f"joint action pattern has {len(r.action)} components, {len(doc.agents)} agents declared", r.span)
                for elem in r.action:
                    known_all(elem, actions, "action")
            if r.target is not None:
                known(r.target, mstates, "monitor state")

    kinds = set()
    for p in doc.policies:
        if p.kind in kinds:
            err("DuplicateDefinition", f"{p.kind} policy declared twice", p.span)
        kinds.add(p.kind)
        norm = p.get("norm")
        if norm is not None:
            known(norm, norm_names, "norm")
        money = p.get("money")
        if money is not None:
            known(money, resources, "resource")
        required = ("money", "sv") if p.kind == "sanction" else ("cv", "sv", "w", "action")
        for key in required:
            if p.get(key) is None:
                err("ParseError", f"{p.kind} policy lacks {key}", p.span, f"{key}=...")
        for key in ("sv", "cv", "w"):
            v = p.get(key)
            if v is not None and not isinstance(v, int):
                err("ParseError", f"{key} must be an integer", v.span, "integer")
        if p.kind == "sanction":
            mode = p.get("mode")
            if mode is not None and mode not in ("trigger", "collective"):
                err("ParseError", f"unknown sanction mode {mode!r}", mode.span, "trigger or collective")
            sv = p.get("sv")
            if isinstance(sv, int) and sv < 1:
                err("InvalidPolicy", "sanction value sv must be at least 1", p.span)
        if p.kind == "repair":
            action = p.get("action")
            if action is not None:
                known(action, actions, "action")
            cv, sv, w = p.get("cv"), p.get("sv"), p.get("w")
            if isinstance(cv, int) and isinstance(sv, int) and cv >= sv:
                err(
                    "InvalidPolicy",
                    f"compensation cv={cv} must be lower than the sanction value sv={sv} (rule cv < sv)",
                    p.span,
                )
            if isinstance(w, int) and w < 1:
                err("InvalidPolicy", "repair window w must be at least 1", p.span)
            if isinstance(cv, int) and cv < 1:
                err("InvalidPolicy", "compensation cv must be at least 1", p.span)


def parse(text: str, file: str = "<input>") -> Document:
    """Parse and resolve a document; raises :class:`DslError` on any error."""
    tokens, diags = tokenize(text, file)
    doc = _Parser(tokens, diags).document()
    if not any(d.severity == "error" for d in diags):
        _resolve(doc, diags)
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise DslError(errors)
    return doc


# -- lowering ---------------------------------------------------------------


@dataclass
class SanctionSpec:
    policy: SanctionPolicy
    norm: str | None
    mode: str


@dataclass
class RepairSpec:
    policy: ReparationPolicy
    norm: str | None


@dataclass
class Lowered:
    model: Model
    norms: list[NormMonitor]
    sanction: SanctionSpec | None = None
    repair: RepairSpec | None = None
    warnings: list[Diagnostic] = field(default_factory=list)

    def norm(self, name: str | None = None) -> NormMonitor:
        if name is None:
            if not self.norms:
                raise KeyError("document declares no norm")
            return self.norms[0]
        for n in self.norms:
            if n.name == name:
                return n
        raise KeyError(f"no norm named {name!r}")


def _matches(pattern, sigma_names) -> bool:
    return all(elem is None or x in elem for elem, x in zip(pattern, sigma_names))


def lower(doc: Document) -> Lowered:
    """Build the model, monitors and policies of a resolved document."""
    diags: list[Diagnostic] = []
    state_span = {s.name: s.name.span for s in doc.states}
    avail = {(e.state, e.agent): e.actions for e in doc.avail}
    cost_span = {(e.state, e.agent, e.action): e.span for e in doc.costs}

    outcome: dict = {}
    used = set()
    for s in doc.states:
        per_agent = [sorted(set(avail.get((s.name, a), ())), key=doc.actions.index) for a in doc.agents]
        if not all(per_agent):
            continue
        rules = [(k, e) for k, e in enumerate(doc.outcomes) if e.state == s.name]
        for sigma in itertools.product(*per_agent):
            for k, e in rules:
                if _matches(e.pattern, sigma):
                    outcome[(str(s.name), tuple(map(str, sigma)))] = str(e.target)
                    used.add(k)
                    break
    for k, e in enumerate(doc.outcomes):
        if k in used:
            continue
        if all(elem is not None and len(elem) == 1 for elem in e.pattern):
            diags.append(Diagnostic("error", "IllegalJointAction", "outcome entry names an unavailable joint action", e.span))
        else:
            diags.append(Diagnostic("warning", "UnusedOutcome", "outcome pattern matches no available joint action", e.span))

    raw = RawModel(
        agents=[str(a) for a in doc.agents],
        resources=[str(r) for r in doc.resources],
        states=[str(s.name) for s in doc.states],
        actions=[str(x) for x in doc.actions],
        availability={(str(q), str(a)): [str(x) for x in acts] for (q, a), acts in avail.items()},
        cost={(str(e.state), str(e.agent), str(e.action)): e.vector for e in doc.costs},
        outcome=outcome,
        initial=[str(s.name) for s in doc.states if s.initial],
    )
    model = None
    try:
        model = validate_model(raw)
    except ModelValidationError as exc:
        for v in exc.violations:
            span = None
            if len(v.coords) == 3 and v.coords[:3] in cost_span:
                span = cost_span[v.coords]
            elif v.coords and v.coords[0] in state_span:
                span = state_span[v.coords[0]]
            else:
                span = doc.sections.get("states", Span(1, 1, 0))
            diags.append(Diagnostic("error", v.kind, f"{v.message} at {v.coords}", span))
    if model is not None:
        for v in model.warnings:
            q, a, x = v.coords
            diags.append(
                Diagnostic("warning", v.kind, f"no cost for {a}:{x} at {q}; {v.message}", state_span[q])
            )
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise DslError(errors)

    norms = [_lower_norm(model, block, diags) for block in doc.norms]
    sanction_spec = repair_spec = None
    for p in doc.policies:
        try:
            if p.kind == "sanction":
                sanction_spec = SanctionSpec(
                    SanctionPolicy(model.resource_id(p.get("money")), p.get("sv")),
                    p.get("norm"),
                    str(p.get("mode", "trigger")),
                )
            else:
                money = p.get("money")
                if money is None:
                    sp = next((o for o in doc.policies if o.kind == "sanction"), None)
                    money = sp.get("money") if sp else ("money" if "money" in model.resources else None)
                policy = ReparationPolicy(
                    p.get("cv"), p.get("sv"), p.get("w"), str(p.get("action")),
                    model.resource_id(money) if money is not None else 0,
                )
                for problem in check_repair_payment(model, policy):
                    diags.append(Diagnostic("error", "InvalidPolicy", problem, p.span))
                repair_spec = RepairSpec(policy, p.get("norm"))
        except InvalidPolicy as exc:
            diags.append(Diagnostic("error", "InvalidPolicy", str(exc), p.span))
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise DslError(errors)
    return Lowered(model, norms, sanction_spec, repair_spec, [d for d in diags if d.severity == "warning"])


def _lower_norm(m: Model, block: NormBlock, diags: list[Diagnostic]) -> NormMonitor | None:
    names = [str(s.name) for s in block.states]
    mid = {n: i for i, n in enumerate(names)}
    status = [Status(s.status) for s in block.states]
    initial = next(i for i, s in enumerate(block.states) if s.initial)

    def ids(elem, lookup):
        return None if elem is None else frozenset(lookup(x) for x in elem)

    rules = []
    for r in block.rules:
        action = None
        if r.action is not None:
            action = tuple(ids(elem, m.action_id) for elem in r.action)
        rules.append(
            Rule(
                STAY if r.target is None else mid[r.target],
                ids(r.source, mid.__getitem__),
                ids(r.states, m.state_id),
                action,
            )
        )
    starts = [StartRule(mid[r.target], ids(r.states, m.state_id)) for r in block.starts]
    try:
        return compile_monitor(m, str(block.name), names, status, initial, rules, starts)
    except NonTotalMonitor as exc:
        raise DslError([Diagnostic("error", "MonitorError", str(exc), block.span, "a wildcard default rule 'on _ / _ -> ...'")])


def load(text: str, file: str = "<input>") -> Lowered:
    return lower(parse(text, file))


# -- serialization ----------------------------------------------------------


def _set(names: Sequence[str]) -> str:
    if len(names) == 1:
        return str(names[0])
    return "{" + ",".join(names) + "}"


def _pat(elem) -> str:
    return "_" if elem is None else _set(elem)


def _joint_pat(pattern) -> str:
    if pattern is None:
        return "_"
    return "(" + ",".join(_pat(e) for e in pattern) + ")"


def serialize(doc: Document) -> str:
    """Canonical text of ``doc`` (LF line endings, fixed section order)."""
    out = []
    out.append("agents " + " ".join(doc.agents) + ";")
    out.append("resources" + "".join(" " + r for r in doc.resources) + ";")
    out.append("states " + " ".join(s.name + ("*" if s.initial else "") for s in doc.states) + ";")
    out.append("actions " + " ".join(doc.actions) + ";")
    out.append("")
    for e in doc.avail:
        acts = "{" + ",".join(e.actions) + "}"
        out.append(f"avail {e.state} {e.agent} {acts};")
    out.append("")
    for e in doc.costs:
        out.append(f"cost {e.state} {e.agent} {e.action} = [{','.join(map(str, e.vector))}];")
    out.append("")
    for e in doc.outcomes:
        out.append(f"outcome {e.state} {_joint_pat(e.pattern)} -> {e.target};")
    for block in doc.norms:
        out.append("")
        out.append(f"norm {block.name} {{")
        for s in block.states:
            out.append(f"  state {s.name} {s.status}" + (" init" if s.initial else "") + ";")
        for r in block.starts:
            out.append(f"  start {_pat(r.states)} -> {r.target};")
        for r in block.rules:
            src = "" if r.source is None else _pat(r.source) + ": "
            target = "_" if r.target is None else r.target
            out.append(f"  on {src}{_pat(r.states)} / {_joint_pat(r.action)} -> {target};")
        out.append("}")
    out.append("")
    for p in doc.policies:
        parts = [f"policy {p.kind}"]
        for k, v in p.params:
            if p.kind == "sanction" and k == "money":
                parts.append(str(v))
            else:
                parts.append(f"{k}={v}")
        out.append(" ".join(parts) + ";")
    return "\n".join(out) + "\n"


def monitor_block(m: Model, mon: NormMonitor) -> NormBlock:
    """Explicit, first-match-free rule listing of a compiled monitor."""
    block = NormBlock(Ident(mon.name))
    for i, name in enumerate(mon.state_names):
        block.states.append(MonitorStateDecl(Ident(name), mon.status[i].value, i == mon.initial))
    for q in range(m.n_states):
        if mon.start[q] != mon.initial:
            block.starts.append(StartRuleDecl((Ident(m.states[q]),), Ident(mon.state_names[mon.start[q]])))
    for mu in range(mon.n_states):
        if mon.is_violation(mu):
            continue
        src = (Ident(mon.state_names[mu]),)
        for q in range(m.n_states):
            joints = [s for (nu, p, s) in mon.delta if nu == mu and p == q]
            targets = [mon.delta[(mu, q, s)] for s in sorted(joints)]
            if not targets:
                continue
            common = max(set(targets), key=lambda t: (targets.count(t), -t))
            for sigma, t in zip(sorted(joints), targets):
                if t != common:
                    pattern = tuple((Ident(m.actions[x]),) for x in sigma)
                    block.rules.append(
                        NormRule(src, (Ident(m.states[q]),), pattern, Ident(mon.state_names[t]))
                    )
            target = None if common == mu else Ident(mon.state_names[common])
            block.rules.append(NormRule(src, (Ident(m.states[q]),), None, target))
    return block


def model_document(
    m: Model,
    monitors: Sequence[NormMonitor] = (),
    policies: Sequence[PolicyDecl] = (),
) -> Document:
    """A document whose lowering reproduces ``m`` (and the given monitors)."""
    I = Ident
    doc = Document(
        agents=[I(a) for a in m.agents],
        resources=[I(r) for r in m.resources],
        states=[StateDecl(I(s), q in m.initial) for q, s in enumerate(m.states)],
        actions=[I(x) for x in m.actions],
    )
    for q in range(m.n_states):
        for a in range(m.n_agents):
            doc.avail.append(
                AvailEntry(I(m.states[q]), I(m.agents[a]), tuple(I(m.actions[x]) for x in m.availability[q][a]))
            )
    for (q, a, x) in sorted(m.cost):
        doc.costs.append(CostEntry(I(m.states[q]), I(m.agents[a]), I(m.actions[x]), tuple(m.cost[(q, a, x)])))
    for (q, sigma) in sorted(m.outcome):
        pattern = tuple((I(m.actions[x]),) for x in sigma)
        doc.outcomes.append(OutcomeEntry(I(m.states[q]), pattern, I(m.states[m.outcome[(q, sigma)]])))
    doc.norms = [monitor_block(m, mon) for mon in monitors]
    doc.policies = list(policies)
    return doc
