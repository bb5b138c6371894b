"""Contract-based rule matching over slot-encoded contexts.

This is an alternative matching backend. A bijection maps the seven local
directions onto integer slots 0..6; a concrete context then becomes, per
symbol, the set of slots that hold it, stored as closed integer intervals.
States and rules both turn into assume-guarantee contracts over these
interval constraints, and matching is decided by composing a state's
contract with a rule's. The direct matcher stays the reference; both
backends are held to identical answers by the test suite.

The slot assignment is a degree of freedom: interval shapes (and so the
number of constraints) depend on which direction lands on which slot.
``optimal_assignment`` scans all 5040 bijections for the one minimizing the
total interval count across every concrete context of every rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from math import prod

from gridgram.core import Direction, State, Symbol
from gridgram.grammar import Grammar, Rule

_DIRECTIONS = tuple(Direction)


class MatcherError(Exception):
    """Base class for contract-backend failures."""


class AssignmentMismatchError(MatcherError):
    """Two contract unions built under different direction assignments."""


class EmptyGrammarError(MatcherError):
    """The grammar expands to no concrete contexts at all."""


@dataclass(frozen=True, slots=True)
class DirectionAssignment:
    """A bijection from directions to integer slots 0..6.

    ``slot_of`` is indexed by Direction; ``slot_of[d]`` is d's slot.
    """

    slot_of: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.slot_of) != 7 or sorted(self.slot_of) != list(range(7)):
            raise ValueError(f"not a bijection onto 0..6: {self.slot_of}")

    @classmethod
    def identity(cls) -> DirectionAssignment:
        return cls(tuple(range(7)))

    def slot(self, d: Direction) -> int:
        return self.slot_of[d]

    def direction_at(self, slot: int) -> Direction:
        return _DIRECTIONS[self.slot_of.index(slot)]

    def to_obj(self) -> dict:
        return {d.label: self.slot_of[d] for d in _DIRECTIONS}

    @classmethod
    def from_obj(cls, obj: dict) -> DirectionAssignment:
        if not isinstance(obj, dict):
            raise ValueError("assignment must be a direction-to-slot map")
        want = {d.label for d in _DIRECTIONS}
        if obj.keys() != want:
            raise ValueError(f"assignment keys must be exactly {sorted(want)}")
        return cls(tuple(int(obj[d.label]) for d in _DIRECTIONS))

    def __str__(self) -> str:
        return " ".join(f"{d.label}={self.slot_of[d]}" for d in _DIRECTIONS)


@dataclass(frozen=True, slots=True)
class IntervalSet:
    """Disjoint, non-adjacent, sorted closed integer intervals within [0,6]."""

    intervals: tuple[tuple[int, int], ...]
    ints: frozenset[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        last = -2
        for lo, hi in self.intervals:
            if not (0 <= lo <= hi <= 6):
                raise ValueError(f"interval [{lo},{hi}] out of range")
            if lo <= last + 1:
                raise ValueError("intervals must be sorted and maximally merged")
            last = hi
        object.__setattr__(
            self,
            "ints",
            frozenset(v for lo, hi in self.intervals for v in range(lo, hi + 1)),
        )

    @classmethod
    def from_ints(cls, values) -> IntervalSet:
        vals = sorted(set(values))
        out: list[tuple[int, int]] = []
        for v in vals:
            if out and v == out[-1][1] + 1:
                out[-1] = (out[-1][0], v)
            else:
                out.append((v, v))
        return cls(tuple(out))

    def to_ints(self) -> frozenset[int]:
        return self.ints

    @property
    def count(self) -> int:
        return len(self.intervals)

    def text(self) -> str:
        return ",".join(
            str(lo) if lo == hi else f"{lo}-{hi}" for lo, hi in self.intervals
        )


@dataclass(frozen=True, slots=True)
class SymbolConstraint:
    """One symbol pinned to a set of slots: every slot in ``dirs`` holds it."""

    symbol: Symbol
    dirs: IntervalSet

    def text(self) -> str:
        return f"{self.symbol.label} in {{{self.dirs.text()}}}"


@dataclass(frozen=True, slots=True)
class ProductionGuarantee:
    """What applying a rule promises: the placed symbol, plus an edge slot."""

    ego_symbol: Symbol
    edge_slot: int | None

    def __post_init__(self) -> None:
        if not self.ego_symbol.is_terminal:
            raise ValueError("a production guarantee places a terminal symbol")
        if self.edge_slot is not None and not 0 <= self.edge_slot <= 6:
            raise ValueError(f"edge slot {self.edge_slot} out of range")

    def text(self) -> str:
        if self.edge_slot is None:
            return f"produce {self.ego_symbol.label}"
        return f"produce {self.ego_symbol.label}, edge slot {self.edge_slot}"


@dataclass(frozen=True, slots=True)
class ConjunctiveContract:
    """A conjunction of interval constraints, split into assume/guarantee."""

    assumptions: tuple[SymbolConstraint, ...]
    guarantees: tuple[SymbolConstraint, ...]
    production: ProductionGuarantee | None = None

    def __post_init__(self) -> None:
        for side in (self.assumptions, self.guarantees):
            syms = [c.symbol for c in side]
            if len(syms) != len(set(syms)):
                raise ValueError("a symbol may appear at most once per side")


@dataclass(frozen=True, slots=True)
class ContractUnion:
    """A non-empty disjunction of conjunctive contracts, one assignment."""

    assignment: DirectionAssignment
    members: tuple[ConjunctiveContract, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("a contract union needs at least one member")


def encode_context(
    ctx: State, assignment: DirectionAssignment
) -> tuple[SymbolConstraint, ...]:
    """Per-symbol slot intervals for a concrete context, symbol-code order."""
    by_symbol: dict[Symbol, list[int]] = {}
    for d in _DIRECTIONS:
        by_symbol.setdefault(ctx.at(d), []).append(assignment.slot(d))
    return tuple(
        SymbolConstraint(s, IntervalSet.from_ints(slots))
        for s, slots in sorted(by_symbol.items())
    )


def decode_context(
    constraints: tuple[SymbolConstraint, ...], assignment: DirectionAssignment
) -> State:
    """Inverse of encode_context; the constraints must tile all seven slots."""
    symbols: list[Symbol | None] = [None] * 7
    for c in constraints:
        for slot in c.dirs.to_ints():
            d = assignment.direction_at(slot)
            if symbols[d] is not None:
                raise MatcherError(f"slot {slot} is constrained twice")
            symbols[d] = c.symbol
    if any(s is None for s in symbols):
        raise MatcherError("constraints do not cover every slot")
    return State(tuple(symbols))


def constraint_count(ctx: State, assignment: DirectionAssignment) -> int:
    """How many intervals the encoding of ``ctx`` needs under ``assignment``."""
    return sum(c.dirs.count for c in encode_context(ctx, assignment))


def state_to_contract_union(
    state: State, assignment: DirectionAssignment
) -> ContractUnion:
    """A state asserts everything it holds: empty assumptions, full guarantees."""
    member = ConjunctiveContract(
        assumptions=(), guarantees=encode_context(state, assignment)
    )
    return ContractUnion(assignment, (member,))


def rule_to_contract_union(
    rule: Rule, assignment: DirectionAssignment
) -> ContractUnion:
    """One member per distinct concrete context the rule accepts.

    Each member assumes one accepted context and guarantees the production
    (placed symbol, plus the edge's slot for non-ego connections).
    """
    keys = rule.context_key_set()
    if not keys:
        raise EmptyGrammarError(f"rule {rule.name!r} accepts no contexts")
    if rule.production.direction is Direction.EGO:
        guarantee = ProductionGuarantee(rule.production.symbol, None)
    else:
        guarantee = ProductionGuarantee(
            rule.production.symbol, assignment.slot(rule.production.direction)
        )
    members = tuple(
        ConjunctiveContract(
            assumptions=encode_context(State.from_key(k), assignment),
            guarantees=(),
            production=guarantee,
        )
        for k in sorted(keys)
    )
    return ContractUnion(assignment, members)


def abstract_contract(
    member: ConjunctiveContract, present_symbols: set[Symbol] | frozenset[Symbol]
) -> ConjunctiveContract:
    """Drop assumptions about symbols the other side does not mention at all."""
    kept = tuple(c for c in member.assumptions if c.symbol in present_symbols)
    return ConjunctiveContract(
        assumptions=kept, guarantees=member.guarantees, production=member.production
    )


def compose_matches(state_u: ContractUnion, rule_u: ContractUnion) -> bool:
    """True when every state member composes with some rule member.

    A rule member composes with a state member when, after abstracting away
    symbols the state never holds, (a) each remaining assumption's slots are
    among the slots the state guarantees for that symbol, and (b) the
    remaining assumptions still pin down all seven slots. Dropping either
    condition admits states the direct matcher rejects: containment alone
    is blind to assumptions lost in abstraction, and coverage alone ignores
    where the symbols sit.
    """
    if state_u.assignment != rule_u.assignment:
        raise AssignmentMismatchError(
            f"state union uses ({state_u.assignment}), "
            f"rule union uses ({rule_u.assignment})"
        )
    for s_member in state_u.members:
        held = {c.symbol: c.dirs.ints for c in s_member.guarantees}
        composes = False
        for r_member in rule_u.members:
            # Inline abstraction: constraints on absent symbols drop out of
            # both the containment and the coverage side.
            covered = 0
            ok = True
            for c in r_member.assumptions:
                have = held.get(c.symbol)
                if have is None:
                    continue
                need = c.dirs.ints
                if not need <= have:
                    ok = False
                    break
                covered += len(need)
            if ok and covered == 7:
                composes = True
                break
        if not composes:
            return False
    return True


def member_key(member: ConjunctiveContract) -> int:
    """Pack a full-context member's assumption slots into a 21-bit code."""
    code = 0
    covered = 0
    for c in member.assumptions:
        for slot in c.dirs.to_ints():
            code |= c.symbol << (3 * slot)
            covered += 1
    if covered != 7:
        raise MatcherError("member does not constrain every slot")
    return code


def encode_state_key(key: int, assignment: DirectionAssignment) -> int:
    """Reorder a packed direction-order state key into slot order."""
    code = 0
    for d in _DIRECTIONS:
        code |= ((key >> (3 * d)) & 7) << (3 * assignment.slot_of[d])
    return code


def contract_match_fn(grammar: Grammar, assignment: DirectionAssignment | None = None):
    """Matching backend for the derivation engine: (rule index, key) -> bool.

    Each rule's contract union denotes a set of accepted slot codes; a state
    matches when its own code is in that set. The codes are produced here by
    the same context-to-slots encoding the union members carry, fused so the
    engine never materializes per-context objects; tests pin this table to
    ``member_key`` over ``rule_to_contract_union`` and to ``compose_matches``.
    """
    if assignment is None:
        if grammar.rules:
            assignment, _ = optimal_assignment(grammar)
        else:
            assignment = DirectionAssignment.identity()
    perm = assignment.slot_of
    tables = []
    for rule in grammar.rules:
        codes = set()
        for pattern in rule.omega:
            for key in pattern.context_keys():
                code = 0
                for i in range(7):
                    code |= ((key >> (3 * i)) & 7) << (3 * perm[i])
                codes.add(code)
        tables.append(frozenset(codes))

    def match(rule_index: int, key: int) -> bool:
        return encode_state_key(key, assignment) in tables[rule_index]

    return match


def _subtract_box(
    box: tuple[frozenset, ...], cut: tuple[frozenset, ...]
) -> list[tuple[frozenset, ...]]:
    """Orthogonal difference box \\ cut as disjoint boxes."""
    if any(not (b & c) for b, c in zip(box, cut)):
        return [box]
    pieces = []
    common: list[frozenset] = []
    for i, (b, c) in enumerate(zip(box, cut)):
        rest = b - c
        if rest:
            pieces.append(tuple(common) + (rest,) + box[i + 1 :])
        common.append(b & c)
    return pieces


def optimal_assignment(grammar: Grammar) -> tuple[DirectionAssignment, int]:
    """Scan all 5040 bijections for the minimum total interval count.

    The total is summed over every distinct concrete context of every rule.
    Enumerating contexts explicitly is hopeless for wildcard-heavy rules, so
    each rule's patterns are first decomposed into disjoint boxes (products
    of per-direction symbol sets). Within one box, a context's interval
    count is one plus the number of adjacent slot pairs holding different
    symbols, which sums in closed form from pairwise set sizes. The scan
    then costs six table lookups per bijection. Ties break toward the
    lexicographically smallest slot tuple in direction order.
    """
    total_size = 0
    pair = [[0] * 7 for _ in range(7)]
    saw_context = False
    for rule in grammar.rules:
        boxes: list[tuple[frozenset, ...]] = []
        for pattern in rule.omega:
            pieces = [pattern.sets]
            for done in boxes:
                pieces = [q for piece in pieces for q in _subtract_box(piece, done)]
            boxes.extend(pieces)
        for box in boxes:
            saw_context = True
            sizes = [len(s) for s in box]
            size = prod(sizes)
            total_size += size
            for d in range(7):
                for e in range(d + 1, 7):
                    rest = size // (sizes[d] * sizes[e])
                    diff = rest * (sizes[d] * sizes[e] - len(box[d] & box[e]))
                    pair[d][e] += diff
                    pair[e][d] += diff
    if not saw_context:
        raise EmptyGrammarError("grammar has no concrete contexts to encode")

    best_cost = None
    best = None
    inv = [0] * 7
    for slot_of in permutations(range(7)):
        for d, s in enumerate(slot_of):
            inv[s] = d
        cost = total_size
        prev = inv[0]
        for s in range(1, 7):
            cur = inv[s]
            cost += pair[prev][cur]
            prev = cur
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best = slot_of
    return DirectionAssignment(best), best_cost


def contract_text(union: ContractUnion) -> str:
    """Human-readable rendering of a contract union, one member per block."""
    lines = [f"assignment: {union.assignment}", f"members: {len(union.members)}"]
    for i, m in enumerate(union.members, start=1):
        lines.append(f"member {i}:")
        assume = "; ".join(c.text() for c in m.assumptions) or "true"
        lines.append(f"  assume: {assume}")
        parts = [c.text() for c in m.guarantees]
        if m.production is not None:
            parts.append(m.production.text())
        lines.append(f"  guarantee: {'; '.join(parts) or 'true'}")
    return "\n".join(lines)
