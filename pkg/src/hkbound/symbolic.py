"""Term algebras, deduction closure, and algebraic guard checking.

Terms are free applications of theory operators over named atoms.  A
theory contributes a normalizer (a confluent rewrite applied bottom-up
to a fixpoint) and optionally multi-premise inference rules, e.g. the
token-extraction step: responses to a challenge and to its negation
together surrender the whole token.

Derivation closure is the usual saturate-under-operators construction,
kept finite by a depth bound, a term-size cap, and a cap on the number
of distinct terms retained.  ``derivable`` therefore means "derivable
within the configured budget"; a False answer is a budget-relative
verdict, which is all a desk-scale checker can offer.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence


@dataclass(frozen=True, slots=True)
class Term:
    op: str
    args: tuple["Term", ...] = ()

    def is_atom(self) -> bool:
        return not self.args

    def nodes(self) -> int:
        return 1 + sum(a.nodes() for a in self.args)

    def render(self) -> str:
        if not self.args:
            return self.op
        return f"{self.op}({','.join(a.render() for a in self.args)})"

    def __str__(self) -> str:
        return self.render()


def atom(name: str) -> Term:
    return Term(name)


def app(op: str, *args: Term) -> Term:
    return Term(op, tuple(args))


_TOKEN = re.compile(r"\s*([A-Za-z0-9_]+|[(),.])")


def parse(text: str) -> Term:
    """Parse the prefix syntax: ``pair(u,v)``, ``exp(g,x)``, ``H(s.a.b)``.

    A dot chain abbreviates right-nested pairing, so ``s.a.b`` reads as
    ``pair(s,pair(a,b))``.
    """
    pos = 0

    def peek() -> str | None:
        m = _TOKEN.match(text, pos)
        return m.group(1) if m else None

    def take(expect: str | None = None) -> str:
        nonlocal pos
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"parse error at offset {pos} in {text!r}")
        tok = m.group(1)
        if expect is not None and tok != expect:
            raise ValueError(f"expected {expect!r} at offset {pos} in {text!r}, got {tok!r}")
        pos = m.end()
        return tok

    def parse_chain() -> Term:
        first = parse_app()
        items = [first]
        while peek() == ".":
            take(".")
            items.append(parse_app())
        out = items[-1]
        for t in reversed(items[:-1]):
            out = app("pair", t, out)
        return out

    def parse_app() -> Term:
        name = take()
        if not re.fullmatch(r"[A-Za-z0-9_]+", name):
            raise ValueError(f"expected a name in {text!r}, got {name!r}")
        if peek() != "(":
            return atom(name)
        take("(")
        args = [parse_chain()]
        while peek() == ",":
            take(",")
            args.append(parse_chain())
        take(")")
        return app(name, *args)

    out = parse_chain()
    if text[pos:].strip():
        raise ValueError(f"trailing input in {text!r}")
    return out


# ---------------------------------------------------------------------------
# Theories.


@dataclass(frozen=True)
class Theory:
    """An operator signature with a normalizer and extra inference rules."""

    name: str
    ops: tuple[tuple[str, int], ...]
    step: Callable[[Term], Term | None]  # single root rewrite, None if stuck
    rules: tuple[Callable[[frozenset], Iterable[Term]], ...] = ()

    def normalize(self, t: Term) -> Term:
        args = tuple(self.normalize(a) for a in t.args)
        cur = Term(t.op, args)
        while True:
            nxt = self.step(cur)
            if nxt is None:
                return cur
            # A root rewrite can expose a new redex below, renormalize.
            cur = self.normalize(nxt)


def _pairing_step(t: Term) -> Term | None:
    if t.op == "p1" and len(t.args) == 1 and t.args[0].op == "pair":
        return t.args[0].args[0]
    if t.op == "p2" and len(t.args) == 1 and t.args[0].op == "pair":
        return t.args[0].args[1]
    return None


def _dy_step(t: Term) -> Term | None:
    got = _pairing_step(t)
    if got is not None:
        return got
    if (
        t.op == "sdec"
        and len(t.args) == 2
        and t.args[0].op == "senc"
        and len(t.args[0].args) == 2
        and t.args[0].args[1] == t.args[1]
    ):
        return t.args[0].args[0]
    return None


def _dh_step(t: Term) -> Term | None:
    got = _pairing_step(t)
    if got is not None:
        return got
    if t.op == "exp" and len(t.args) >= 2:
        base = t.args[0]
        exps = list(t.args[1:])
        if base.op == "exp" and len(base.args) >= 2:
            return Term("exp", (base.args[0],) + tuple(base.args[1:]) + tuple(exps))
        ordered = sorted(exps, key=lambda e: e.render())
        if tuple(ordered) != tuple(exps):
            return Term("exp", (base,) + tuple(ordered))
    return None


def _neg_step(t: Term) -> Term | None:
    got = _pairing_step(t)
    if got is not None:
        return got
    if t.op == "neg" and len(t.args) == 1 and t.args[0].op == "neg":
        return t.args[0].args[0]
    return None


def _hk_extract(terms: frozenset) -> Iterable[Term]:
    """From boxplus(t,u) and boxplus(neg t,u), recover u."""
    seen = {}
    for t in terms:
        if t.op == "boxplus" and len(t.args) == 2:
            seen.setdefault(t.args[1], set()).add(t.args[0])
    for token, challenges in seen.items():
        for c in challenges:
            flipped = HK.normalize(app("neg", c))
            if flipped in challenges:
                yield token
                break


def _cr_step(t: Term) -> Term | None:
    got = _pairing_step(t)
    if got is not None:
        return got
    if (
        t.op == "respond"
        and len(t.args) == 2
        and t.args[0].op == "cVP"
        and len(t.args[0].args) == 1
        and t.args[1] == Term("sVP", ())
    ):
        return Term("rVP", (t.args[0].args[0],))
    return None


PAIRING = Theory("pairing", (("pair", 2), ("p1", 1), ("p2", 1)), _pairing_step)

DOLEV_YAO = Theory(
    "dolev-yao",
    (("pair", 2), ("p1", 1), ("p2", 1), ("senc", 2), ("sdec", 2)),
    _dy_step,
)

DH = Theory("dh", (("pair", 2), ("p1", 1), ("p2", 1), ("exp", 2)), _dh_step)

HK = Theory(
    "hk",
    (("pair", 2), ("p1", 1), ("p2", 1), ("H", 1), ("boxplus", 2), ("neg", 1)),
    _neg_step,
    (_hk_extract,),
)

# One verifier-prover pair's challenge-response alphabet: cVP tags a
# nonce as that pair's challenge and respond runs the (public) response
# computation, so both are appliable; rVP and sVP stay outside the
# appliable signature because a closure that could mint them would be
# forging responses, or the pair secret, out of thin air.
CR = Theory(
    "cr",
    (("pair", 2), ("p1", 1), ("p2", 1), ("cVP", 1), ("respond", 2)),
    _cr_step,
)

THEORIES: dict[str, Theory] = {t.name: t for t in (PAIRING, DOLEV_YAO, DH, HK, CR)}

DEFAULT_DEPTH = 6
DEFAULT_SIZE_CAP = 64
DEFAULT_MAX_TERMS = 2400


@dataclass(frozen=True)
class Closure:
    terms: frozenset
    saturated: bool  # False when a budget stopped the construction


def _interleave(streams: list) -> Iterable[Term]:
    """Round-robin over candidate streams so no operator starves another."""
    live = [iter(s) for s in streams]
    while live:
        nxt = []
        for it in live:
            try:
                yield next(it)
            except StopIteration:
                continue
            nxt.append(it)
        live = nxt


def derive_closure(
    start: Iterable[Term],
    theory: Theory,
    depth: int = DEFAULT_DEPTH,
    size_cap: int = DEFAULT_SIZE_CAP,
    max_terms: int = DEFAULT_MAX_TERMS,
    goal: Term | None = None,
) -> Closure:
    """Saturate under the theory's operators and rules, within budget.

    Candidates are drawn smallest-first and the operators take turns, so
    short natural derivations are found long before the budget bites and
    the outcome never depends on hash ordering.  With a goal given,
    stops as soon as the goal appears; the returned closure is then
    partial but contains the goal.
    """
    current: set = {theory.normalize(t) for t in start}
    if goal is not None and goal in current:
        return Closure(frozenset(current), False)
    saturated = True
    for _ in range(depth):
        ordered = sorted(current, key=lambda t: (t.nodes(), t.render()))

        def op_stream(op: str, arity: int) -> Iterable[Term]:
            return (Term(op, combo) for combo in itertools.product(ordered, repeat=arity))

        streams = [op_stream(op, arity) for op, arity in theory.ops]
        for rule in theory.rules:
            streams.append(iter(sorted(rule(frozenset(current)), key=lambda t: (t.nodes(), t.render()))))
        fresh: set = set()
        found = False
        stopped = False
        for cand in _interleave(streams):
            t = theory.normalize(cand)
            if t.nodes() > size_cap or t in current or t in fresh:
                continue
            fresh.add(t)
            if goal is not None and t == goal:
                found = True
                break
            if len(current) + len(fresh) >= max_terms:
                stopped = True
                break
        current |= fresh
        if found:
            return Closure(frozenset(current), False)
        if stopped:
            saturated = False
            break
        if not fresh:
            break
    return Closure(frozenset(current), saturated)


def derivable(
    start: Iterable[Term],
    goal: Term,
    theory: Theory,
    depth: int = DEFAULT_DEPTH,
    size_cap: int = DEFAULT_SIZE_CAP,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> bool:
    """Goal reachable from the start set within the closure budget."""
    goal = theory.normalize(goal)
    closure = derive_closure(start, theory, depth, size_cap, max_terms, goal=goal)
    return goal in closure.terms


# ---------------------------------------------------------------------------
# Algebraic guards (all-or-nothing derivability).


@dataclass(frozen=True)
class AlgGuardRow:
    subset: tuple[int, ...]
    subset_text: tuple[str, ...]
    derives_target: bool
    witness: int | None
    ok: bool


@dataclass(frozen=True)
class AlgGuardReport:
    rows: tuple[AlgGuardRow, ...]
    ok: bool


@dataclass(frozen=True)
class AlgGuardSpec:
    theory: Theory
    context: tuple[Term, ...]
    target: Term
    guards: tuple[tuple[Term, ...], ...]
    depth: int = DEFAULT_DEPTH

    @classmethod
    def from_json(cls, doc: str | dict) -> "AlgGuardSpec":
        if isinstance(doc, str):
            doc = json.loads(doc)
        theory = THEORIES[doc.get("theory", "pairing")]
        return cls(
            theory=theory,
            context=tuple(parse(t) for t in doc["context"]),
            target=parse(doc["target"]),
            guards=tuple(tuple(parse(t) for t in g) for g in doc["guards"]),
            depth=doc.get("depth", DEFAULT_DEPTH),
        )


def check_alg_guard(spec: AlgGuardSpec) -> AlgGuardReport:
    """Whoever can derive the target can derive some guard set whole."""
    rows = []
    all_ok = True
    for picks in itertools.chain.from_iterable(
        itertools.combinations(range(len(spec.context)), k) for k in range(len(spec.context) + 1)
    ):
        subset = tuple(spec.context[i] for i in picks)
        hits = derivable(subset, spec.target, spec.theory, spec.depth)
        if not hits:
            rows.append(AlgGuardRow(picks, tuple(t.render() for t in subset), False, None, True))
            continue
        witness = None
        for gi, guard in enumerate(spec.guards):
            if all(derivable(subset, g, spec.theory, spec.depth) for g in guard):
                witness = gi
                break
        ok = witness is not None
        all_ok = all_ok and ok
        rows.append(AlgGuardRow(picks, tuple(t.render() for t in subset), True, witness, ok))
    return AlgGuardReport(tuple(rows), all_ok)


@dataclass(frozen=True)
class CollapsedRow:
    subset: tuple[int, ...]
    lhs01: int
    advantage01: int
    rhs01: int | None
    ok: bool
    exempt: bool


@dataclass(frozen=True)
class CollapsedReport:
    rows: tuple[CollapsedRow, ...]
    ok: bool
    agrees_with_algebraic: bool
    baseline01: int


def check_guard_deterministic(spec: AlgGuardSpec) -> CollapsedReport:
    """Guard check with guessing collapsed to zero-or-one derivability.

    This is the degenerate regime where values carry no bits, so a
    guesser that never consults randomness either derives a term or has
    nothing: every chance is 0 or 1 and the product condition reduces to
    plain guard coverage.  The report also states whether the verdict
    matches check_alg_guard; the verdicts can only part ways when the
    target is derivable from the empty context, in which case every
    advantage vanishes and the probabilistic reading exempts all subsets.
    """

    def c01(known: tuple[Term, ...], want: Sequence[Term]) -> int:
        return int(all(derivable(known, w, spec.theory, spec.depth) for w in want))

    baseline = c01((), [spec.target])
    rows = []
    all_ok = True
    for picks in itertools.chain.from_iterable(
        itertools.combinations(range(len(spec.context)), k) for k in range(len(spec.context) + 1)
    ):
        subset = tuple(spec.context[i] for i in picks)
        lhs = c01(subset, [spec.target])
        adv = lhs - baseline
        if adv <= 0:
            rows.append(CollapsedRow(picks, lhs, adv, None, True, True))
            continue
        rhs = 0
        for guard in spec.guards:
            rhs = max(rhs, c01(subset, guard) * c01(subset + tuple(guard), [spec.target]))
        ok = lhs <= rhs
        all_ok = all_ok and ok
        rows.append(CollapsedRow(picks, lhs, adv, rhs, ok, False))
    algebraic = check_alg_guard(spec)
    return CollapsedReport(tuple(rows), all_ok, all_ok == algebraic.ok, baseline)


# ---------------------------------------------------------------------------
# Term contexts over protocol runs.


@dataclass(frozen=True)
class TermContext:
    """What each principal held strictly before a cut point in a run."""

    cut_tick: int | None
    per_principal: dict[str, frozenset]

    def of(self, principal: str) -> frozenset:
        return self.per_principal.get(principal, frozenset())

    def union(self, principals: Iterable[str]) -> frozenset:
        out: frozenset = frozenset()
        for p in principals:
            out |= self.of(p)
        return out


def builtin_alg_guard_spec(name: str) -> AlgGuardSpec:
    """Bundled algebraic guard instances.

    dh: {{x, g^y}, {y, g^x}} guards g^(xy) among the terms floating
    around a Diffie-Hellman run.

    cr: {{cVP(x), sVP}} guards the response rVP(x) among what circulates
    before the response is sent: whoever can produce it held both the
    challenge and the pair secret.
    """
    if name == "dh":
        g, x, y = atom("g"), atom("x"), atom("y")
        gx, gy = app("exp", g, x), app("exp", g, y)
        return AlgGuardSpec(
            theory=DH,
            context=(g, x, y, gx, gy),
            target=app("exp", gx, y),
            guards=((x, gy), (y, gx)),
        )
    if name == "cr":
        challenge = app("cVP", atom("x"))
        secret = atom("sVP")
        return AlgGuardSpec(
            theory=CR,
            context=(challenge, secret, atom("n")),
            target=app("rVP", atom("x")),
            guards=((challenge, secret),),
        )
    raise ValueError(f"unknown builtin algebraic guard spec {name!r}")


def term_context(
    events: Sequence,
    before,
    initial: dict[str, Iterable[Term | str]] | None = None,
    theory: Theory = HK,
) -> TermContext:
    """Collect per-principal term knowledge up to (not including) a cut.

    ``events`` are objects with tick, principal, kind and an optional
    term label (a Term or parseable string).  ``before`` is either a
    predicate selecting the cut events or a collection of them; the cut
    tick is the earliest tick of any selected event.  A principal learns
    the labels of what it receives and freshly generates; initial
    long-term knowledge comes in via ``initial``.
    """
    if callable(before):
        cut_events = [e for e in events if before(e)]
    else:
        chosen = set(id(e) for e in before)
        cut_events = [e for e in events if id(e) in chosen]
    cut_tick = min((e.tick for e in cut_events), default=None)

    held: dict[str, set] = {}

    def learn(principal: str, label) -> None:
        if label is None:
            return
        t = parse(label) if isinstance(label, str) else label
        held.setdefault(principal, set()).add(theory.normalize(t))

    for principal, terms in (initial or {}).items():
        for t in terms:
            learn(principal, t)
    for e in events:
        if cut_tick is not None and e.tick >= cut_tick:
            continue
        if e.kind in ("receive", "fresh"):
            learn(e.principal, getattr(e, "term", None))
    return TermContext(cut_tick, {p: frozenset(s) for p, s in held.items()})
