"""Rules, rule files, wildcard patterns, direct matching, and production application.

A rule file is JSON: ``{"name": ..., "version": ..., "rules": [...]}``. Each
rule gives a list of context patterns (one entry per direction: a symbol
name, a list of names, or "*") and a production ``{"symbol": ..., "connect":
...}``. Patterns are sugar: a pattern stands for the Cartesian product of its
per-direction symbol sets, a finite set of concrete contexts. A rule matches
a state exactly when the state is one of those contexts.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from itertools import product
from typing import Iterator

from gridgram.canon import canonical_hash, canonical_json
from gridgram.core import (
    COMPONENTS,
    Direction,
    Grid,
    InternalInvariantError,
    NONTERMINALS,
    Point,
    State,
    Symbol,
    TERMINALS,
    neighbor,
)

#: What "*" means per direction: ego never admits Boundary.
WILDCARD_EGO = frozenset(s for s in Symbol if s is not Symbol.BOUNDARY)
WILDCARD_NON_EGO = frozenset(Symbol)

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")


class GrammarError(Exception):
    """Base class for grammar-level failures."""


class GrammarParseError(GrammarError):
    """A rule file failed to parse or validate.

    ``kind`` is machine-readable: syntax, format, unknown-symbol,
    unknown-direction, duplicate-rule-name, ego-not-nonterminal,
    empty-with-connection, production-not-terminal.
    ``path`` locates the offending element within the document; ``line`` and
    ``col`` are exact for syntax errors and best-effort (located by the
    enclosing rule's name) otherwise.
    """

    def __init__(
        self,
        kind: str,
        message: str,
        path: str = "$",
        line: int | None = None,
        col: int | None = None,
    ):
        self.kind = kind
        self.message = message
        self.path = path
        self.line = line
        self.col = col
        where = path
        if line is not None:
            where += f" (line {line}" + (f", col {col}" if col is not None else "") + ")"
        super().__init__(f"{kind} at {where}: {message}")


class RuleApplicationError(GrammarError):
    """apply_production called at a point whose state the rule does not match."""


@dataclass(frozen=True, slots=True)
class ContextPattern:
    """Per-direction symbol sets; stands for their Cartesian product.

    ``sets`` is Direction-indexed. Every set is non-empty and the ego set
    never admits Boundary. ``masks`` is the same data as 7 bitmasks (bit i set
    iff Symbol(i) admitted), precomputed for the matching hot path.
    """

    sets: tuple[frozenset[Symbol], ...]
    masks: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.sets) != 7:
            raise ValueError(f"pattern needs 7 direction entries, got {len(self.sets)}")
        for d in Direction:
            if not self.sets[d]:
                raise ValueError(f"empty symbol set at {d.label}")
        if Symbol.BOUNDARY in self.sets[Direction.EGO]:
            raise ValueError("ego entry may not admit Boundary")
        masks = tuple(sum(1 << s for s in ss) for ss in self.sets)
        object.__setattr__(self, "masks", masks)

    def admits(self, state: State) -> bool:
        m = self.masks
        sy = state.symbols
        return all((m[i] >> sy[i]) & 1 for i in range(7))

    def size(self) -> int:
        """Number of concrete contexts this pattern stands for."""
        n = 1
        for ss in self.sets:
            n *= len(ss)
        return n

    def context_keys(self) -> Iterator[int]:
        """Packed 21-bit keys of every concrete context, without building States."""
        choices = [sorted(ss) for ss in self.sets]
        for combo in product(*choices):
            k = 0
            for i, s in enumerate(combo):
                k |= s << (3 * i)
            yield k


def expand(pattern: ContextPattern) -> frozenset[State]:
    """All concrete contexts a pattern stands for."""
    return frozenset(State.from_key(k) for k in pattern.context_keys())


@dataclass(frozen=True, slots=True)
class Production:
    """What a matched rule writes: a terminal at ego, plus an edge when
    ``dir`` is not ego (toward the neighbor in that direction)."""

    symbol: Symbol
    direction: Direction

    def __post_init__(self) -> None:
        if self.symbol not in TERMINALS:
            raise ValueError(f"production symbol must be terminal, got {self.symbol.label}")
        if self.symbol is Symbol.EMPTY and self.direction is not Direction.EGO:
            raise ValueError("Empty carries no physical connection; connect must be ego")


@dataclass(frozen=True, slots=True)
class Rule:
    """A named set of context patterns plus one production.

    Only nonterminals are rewritten: every pattern's ego set must sit inside
    the nonterminal alphabet. ``weight`` feeds the weighted rule-selection
    strategy and is a positive integer so random draws stay exact.
    """

    name: str
    omega: tuple[ContextPattern, ...]
    production: Production
    weight: int = 1

    def __post_init__(self) -> None:
        for pat in self.omega:
            if not pat.sets[Direction.EGO] <= NONTERMINALS:
                bad = sorted(s.label for s in pat.sets[Direction.EGO] - NONTERMINALS)
                raise ValueError(f"rule {self.name}: ego admits non-nonterminal {bad}")
        if self.weight < 1 or isinstance(self.weight, bool):
            raise ValueError(f"rule {self.name}: weight must be a positive integer")

    def matches(self, state: State) -> bool:
        return any(pat.admits(state) for pat in self.omega)

    def context_count(self) -> int:
        """Size of the concrete-context set (patterns may overlap; deduplicated)."""
        return len(self.context_key_set())

    def context_key_set(self) -> frozenset[int]:
        keys: set[int] = set()
        for pat in self.omega:
            keys.update(pat.context_keys())
        return frozenset(keys)


@dataclass(frozen=True, slots=True)
class Grammar:
    """An ordered list of uniquely named rules plus file metadata."""

    name: str
    version: str
    rules: tuple[Rule, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for r in self.rules:
            if r.name in seen:
                raise ValueError(f"duplicate rule name {r.name!r}")
            seen.add(r.name)

    def rule_named(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(f"no rule named {name!r}")

    @property
    def fingerprint(self) -> str:
        """Content hash of the canonical serialization."""
        return canonical_hash(grammar_to_obj(self))


def _entry_to_set(value: object, d: Direction, path: str, line: int | None) -> frozenset[Symbol]:
    if value == "*":
        return WILDCARD_EGO if d is Direction.EGO else WILDCARD_NON_EGO
    if isinstance(value, str):
        names: list[str] = [value]
    elif isinstance(value, list):
        if not value:
            raise GrammarParseError("format", "symbol list may not be empty", path, line)
        names = []
        for v in value:
            if not isinstance(v, str) or v == "*":
                raise GrammarParseError(
                    "unknown-symbol", f"{v!r} is not a symbol name", path, line
                )
            names.append(v)
    else:
        raise GrammarParseError(
            "format", f"expected symbol name, list, or \"*\", got {type(value).__name__}",
            path, line,
        )
    out: set[Symbol] = set()
    for n in names:
        try:
            out.add(Symbol.from_label(n))
        except KeyError:
            raise GrammarParseError("unknown-symbol", f"{n!r}", path, line) from None
    return frozenset(out)


def _line_of(text: str, needle: str, occurrence: int = 1) -> int | None:
    """Best-effort line lookup: the Nth occurrence of a quoted literal."""
    start = 0
    for _ in range(occurrence):
        pos = text.find(f'"{needle}"', start)
        if pos < 0:
            return None
        start = pos + 1
    return text.count("\n", 0, start) + 1


def _require_keys(
    obj: dict, required: set[str], optional: set[str], path: str, line: int | None
) -> None:
    missing = required - obj.keys()
    if missing:
        raise GrammarParseError(
            "format", f"missing key(s) {sorted(missing)}", path, line
        )
    unknown = obj.keys() - required - optional
    if unknown:
        raise GrammarParseError(
            "format", f"unknown key(s) {sorted(unknown)}", path, line
        )


def parse_grammar(text: str) -> Grammar:
    """Parse and fully validate a rule file; raises GrammarParseError."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise GrammarParseError("syntax", e.msg, "$", e.lineno, e.colno) from None
    if not isinstance(doc, dict):
        raise GrammarParseError("format", "top level must be an object", "$", 1)
    _require_keys(doc, {"name", "version", "rules"}, set(), "$", 1)
    if not isinstance(doc["name"], str) or not isinstance(doc["version"], str):
        raise GrammarParseError("format", "name and version must be strings", "$", 1)
    if not isinstance(doc["rules"], list):
        raise GrammarParseError("format", "rules must be a list", "$.rules", 1)

    rules: list[Rule] = []
    seen: dict[str, int] = {}
    for i, robj in enumerate(doc["rules"]):
        rpath = f"$.rules[{i}]"
        if not isinstance(robj, dict):
            raise GrammarParseError("format", "rule must be an object", rpath, None)
        rname = robj.get("name")
        if not isinstance(rname, str) or not _NAME_RE.match(rname):
            raise GrammarParseError(
                "format", f"rule name must be an identifier, got {rname!r}", rpath, None
            )
        line = _line_of(text, rname)
        _require_keys(robj, {"name", "contexts", "produce"}, {"weight"}, rpath, line)
        if rname in seen:
            raise GrammarParseError(
                "duplicate-rule-name",
                f"{rname!r} already defined as rule {seen[rname]}",
                rpath,
                _line_of(text, rname, occurrence=2),
            )
        seen[rname] = i

        if not isinstance(robj["contexts"], list):
            raise GrammarParseError("format", "contexts must be a list", f"{rpath}.contexts", line)
        patterns: list[ContextPattern] = []
        for j, cobj in enumerate(robj["contexts"]):
            cpath = f"{rpath}.contexts[{j}]"
            if not isinstance(cobj, dict):
                raise GrammarParseError("format", "context must be an object", cpath, line)
            dir_labels = {d.label for d in Direction}
            unknown = cobj.keys() - dir_labels
            if unknown:
                raise GrammarParseError(
                    "unknown-direction", f"{sorted(unknown)}", cpath, line
                )
            missing = dir_labels - cobj.keys()
            if missing:
                raise GrammarParseError(
                    "format", f"context missing direction(s) {sorted(missing)}", cpath, line
                )
            sets = tuple(
                _entry_to_set(cobj[d.label], d, f"{cpath}.{d.label}", line) for d in Direction
            )
            if not sets[Direction.EGO] <= NONTERMINALS:
                bad = sorted(s.label for s in sets[Direction.EGO] - NONTERMINALS)
                raise GrammarParseError(
                    "ego-not-nonterminal",
                    f"ego admits {bad}; only nonterminals are rewritten",
                    f"{cpath}.ego",
                    line,
                )
            patterns.append(ContextPattern(sets))

        pobj = robj["produce"]
        ppath = f"{rpath}.produce"
        if not isinstance(pobj, dict):
            raise GrammarParseError("format", "produce must be an object", ppath, line)
        _require_keys(pobj, {"symbol", "connect"}, set(), ppath, line)
        if not isinstance(pobj["symbol"], str):
            raise GrammarParseError("format", "produce.symbol must be a string", ppath, line)
        try:
            psym = Symbol.from_label(pobj["symbol"])
        except KeyError:
            raise GrammarParseError(
                "unknown-symbol", f"{pobj['symbol']!r}", f"{ppath}.symbol", line
            ) from None
        if psym not in TERMINALS:
            raise GrammarParseError(
                "production-not-terminal",
                f"{psym.label} is not a terminal",
                f"{ppath}.symbol",
                line,
            )
        if not isinstance(pobj["connect"], str):
            raise GrammarParseError("format", "produce.connect must be a string", ppath, line)
        try:
            pdir = Direction.from_label(pobj["connect"])
        except KeyError:
            raise GrammarParseError(
                "unknown-direction", f"{pobj['connect']!r}", f"{ppath}.connect", line
            ) from None
        if psym is Symbol.EMPTY and pdir is not Direction.EGO:
            raise GrammarParseError(
                "empty-with-connection",
                "Empty carries no physical connection; connect must be ego",
                f"{ppath}.connect",
                line,
            )

        weight = robj.get("weight", 1)
        if isinstance(weight, bool) or not isinstance(weight, int) or weight < 1:
            raise GrammarParseError(
                "format", f"weight must be a positive integer, got {weight!r}",
                f"{rpath}.weight", line,
            )
        rules.append(Rule(rname, tuple(patterns), Production(psym, pdir), weight))

    return Grammar(doc["name"], doc["version"], tuple(rules))


def _entry_to_obj(ss: frozenset[Symbol], d: Direction) -> object:
    full = WILDCARD_EGO if d is Direction.EGO else WILDCARD_NON_EGO
    if ss == full:
        return "*"
    if len(ss) == 1:
        return next(iter(ss)).label
    return sorted(s.label for s in ss)


def grammar_to_obj(grammar: Grammar) -> dict:
    """Plain-data form of a grammar, in canonical (most compact) notation."""
    rules = []
    for r in grammar.rules:
        robj: dict = {
            "name": r.name,
            "contexts": [
                {d.label: _entry_to_obj(pat.sets[d], d) for d in Direction}
                for pat in r.omega
            ],
            "produce": {
                "symbol": r.production.symbol.label,
                "connect": r.production.direction.label,
            },
        }
        if r.weight != 1:
            robj["weight"] = r.weight
        rules.append(robj)
    return {"name": grammar.name, "version": grammar.version, "rules": rules}


def serialize_grammar(grammar: Grammar) -> str:
    """Canonical rule-file text; parse_grammar(serialize_grammar(g)) == g."""
    return canonical_json(grammar_to_obj(grammar))


def applicable_rules(grammar: Grammar, grid: Grid, p: Point) -> list[Rule]:
    """Rules matching the state at p, in grammar order."""
    state = grid.state_of(p)
    return [r for r in grammar.rules if r.matches(state)]


def apply_production(grid: Grid, p: Point, rule: Rule) -> Grid:
    """Rewrite p per the rule's production; mutates and returns ``grid``.

    The rule must match the current state at p (checked; the grid is left
    untouched on failure). For linted grammars the edge precondition cannot
    fail; if it does anyway, that is an engine bug surfaced as
    InternalInvariantError before any mutation.
    """
    state = grid.state_of(p)
    if not rule.matches(state):
        raise RuleApplicationError(f"rule {rule.name} does not match state at {p}")
    prod = rule.production
    if prod.direction is not Direction.EGO:
        q = neighbor(p, prod.direction)
        if not grid.config.contains(q):
            raise InternalInvariantError(
                f"rule {rule.name}: edge target {q} is outside the grid"
            )
        if not grid.symbol_at(q).is_component:
            raise InternalInvariantError(
                f"rule {rule.name}: edge target {q} holds {grid.symbol_at(q).label}"
            )
    grid.set_symbol(p, prod.symbol)
    if prod.direction is not Direction.EGO:
        grid.add_edge(p, prod.direction)
    return grid


@dataclass(frozen=True, slots=True)
class LintDiagnostic:
    """One linter finding. ``level`` is "error" or "info"."""

    level: str
    code: str
    rule: str | None
    message: str

    def to_obj(self) -> dict:
        return {
            "level": self.level,
            "code": self.code,
            "rule": self.rule,
            "message": self.message,
        }


def _patterns_overlap(a: ContextPattern, b: ContextPattern) -> bool:
    return all(a.masks[i] & b.masks[i] for i in range(7))


def lint_grammar(grammar: Grammar) -> list[LintDiagnostic]:
    """Static rule checks.

    Errors: a production edge can point at a non-component; a rule has no
    contexts at all. Info: two rules share a concrete context (legal, the
    generator picks one); a terminal appears in some context but no rule
    produces it, so those contexts can never see it.
    """
    out: list[LintDiagnostic] = []
    for r in grammar.rules:
        if not r.omega:
            out.append(
                LintDiagnostic(
                    "error", "unreachable-rule", r.name, "rule has no contexts; it can never match"
                )
            )
        d = r.production.direction
        if d is not Direction.EGO:
            for pat in r.omega:
                bad = pat.sets[d] - COMPONENTS
                if bad:
                    names = sorted(s.label for s in bad)
                    out.append(
                        LintDiagnostic(
                            "error",
                            "edge-target-not-component",
                            r.name,
                            f"production connects {d.label} but the {d.label} entry admits {names}",
                        )
                    )
                    break

    for i, a in enumerate(grammar.rules):
        for b in grammar.rules[i + 1 :]:
            if any(_patterns_overlap(pa, pb) for pa in a.omega for pb in b.omega):
                out.append(
                    LintDiagnostic(
                        "info",
                        "overlapping-rules",
                        a.name,
                        f"shares at least one concrete context with rule {b.name}",
                    )
                )

    produced = {r.production.symbol for r in grammar.rules}
    referenced: set[Symbol] = set()
    for r in grammar.rules:
        for pat in r.omega:
            for d in Direction:
                ss = pat.sets[d]
                full = WILDCARD_EGO if d is Direction.EGO else WILDCARD_NON_EGO
                if ss != full:  # a wildcard names nothing deliberately
                    referenced |= ss
    for s in sorted(referenced & (TERMINALS - produced)):
        out.append(
            LintDiagnostic(
                "info",
                "dead-symbol",
                None,
                f"{s.label} appears in contexts but no rule produces it",
            )
        )
    return out


def lint_errors(diags: list[LintDiagnostic]) -> list[LintDiagnostic]:
    return [d for d in diags if d.level == "error"]
