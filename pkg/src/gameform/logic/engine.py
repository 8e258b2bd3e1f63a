"""SLD resolution with negation as failure.

The solver is an explicit machine rather than nested Python generators:
goals wait on a linked continuation, alternatives live on a choicepoint
stack, and bindings are undone through a trail. Depth is bounded by
``max_depth`` instead of the interpreter's recursion limit.
"""
from __future__ import annotations

import itertools
import random
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import DEPTH_LIMIT, EXISTENCE_ERROR, INSTANTIATION_ERROR, TYPE_ERROR, EngineError
from .parser import parse_query
from .program import Builtin, Call, Clause, Compare, Goal, Not, Program, goal_from_term, goal_terms
from .terms import Atom, Int, PList, Struct, Term, Var, variables

DEFAULT_MAX_DEPTH = 10_000
TRACE_FRAMES = 8

_DONE = object()


class _Frame:
    """Call-stack entry used for error traces."""

    __slots__ = ("clause", "parent")

    def __init__(self, clause: Clause, parent: Optional["_Frame"]) -> None:
        self.clause = clause
        self.parent = parent


# continuation node: (goal, depth, frame, rest)
Cont = Optional[Tuple[Goal, int, Optional[_Frame], "Cont"]]


_COMPOUND = (Struct, PList)


class Engine:
    def __init__(
        self,
        program: Program,
        *,
        max_depth: int = DEFAULT_MAX_DEPTH,
        rng: Optional[random.Random] = None,
    ) -> None:
        self.program = program
        self.max_depth = max_depth
        self._rng = rng
        self.bindings: Dict[Var, Term] = {}
        self.trail: List[Var] = []
        self._serial = itertools.count(1)

    @property
    def rng(self) -> random.Random:
        # seeding is costly next to a small query, so only do it when needed
        if self._rng is None:
            self._rng = random.Random(0)
        return self._rng

    # bindings

    def walk(self, t: Term) -> Term:
        b = self.bindings
        while isinstance(t, Var):
            nxt = b.get(t)
            if nxt is None:
                return t
            t = nxt
        return t

    def resolve(self, t: Term) -> Term:
        t = self.walk(t)
        if type(t) in _COMPOUND and t.ground:
            return t
        if isinstance(t, Struct):
            return Struct(t.functor, tuple(self.resolve(a) for a in t.args))
        if isinstance(t, PList):
            return PList(tuple(self.resolve(i) for i in t.items))
        return t

    def _bind(self, v: Var, t: Term) -> None:
        self.bindings[v] = t
        self.trail.append(v)

    def _undo(self, mark: int) -> None:
        trail, b = self.trail, self.bindings
        if len(trail) > mark:
            for v in trail[mark:]:
                del b[v]
            del trail[mark:]

    def _occurs(self, v: Var, t: Term) -> bool:
        stack = [t]
        while stack:
            x = self.walk(stack.pop())
            if x == v:
                return True
            if isinstance(x, Struct):
                stack.extend(x.args)
            elif isinstance(x, PList):
                stack.extend(x.items)
        return False

    def unify(self, a: Term, b: Term) -> bool:
        b_ = self.bindings
        stack = [(a, b)]
        while stack:
            x, y = stack.pop()
            while type(x) is Var:
                nxt = b_.get(x)
                if nxt is None:
                    break
                x = nxt
            while type(y) is Var:
                nxt = b_.get(y)
                if nxt is None:
                    break
                y = nxt
            if x is y:
                continue
            tx, ty = type(x), type(y)
            if tx is Var:
                if ty is Var and x == y:
                    continue
                if ty in _COMPOUND and not y.ground and self._occurs(x, y):
                    return False
                self._bind(x, y)
            elif ty is Var:
                if tx in _COMPOUND and not x.ground and self._occurs(y, x):
                    return False
                self._bind(y, x)
            elif tx is not ty:
                return False
            elif tx is Struct:
                if x.functor != y.functor or len(x.args) != len(y.args):
                    return False
                if x.ground and y.ground:
                    if x != y:
                        return False
                    continue
                stack.extend(zip(x.args, y.args))
            elif tx is PList:
                if len(x.items) != len(y.items):
                    return False
                stack.extend(zip(x.items, y.items))
            elif x != y:
                return False
        return True

    def _rename_term(self, t: Term, m: Dict[Var, Var]) -> Term:
        k = type(t)
        if k is Var:
            r = m.get(t)
            if r is None:
                r = m[t] = Var(t.name, next(self._serial))
            return r
        if k is Struct:
            if t.ground:
                return t
            return Struct(t.functor, tuple([self._rename_term(a, m) for a in t.args]))
        if k is PList:
            if t.ground:
                return t
            return PList(tuple([self._rename_term(i, m) for i in t.items]))
        return t

    def _rename_goal(self, g: Goal, m: Dict[Var, Var]) -> Goal:
        if isinstance(g, Call):
            return Call(self._rename_term(g.term, m))
        if isinstance(g, Builtin):
            return Builtin(g.name, tuple(self._rename_term(a, m) for a in g.args))
        if isinstance(g, Compare):
            return Compare(g.op, self._rename_term(g.left, m), self._rename_term(g.right, m))
        return Not(self._rename_goal(g.goal, m))

    # errors

    def _trace(self, frame: Optional[_Frame]) -> List[str]:
        out = []
        while frame is not None and len(out) < TRACE_FRAMES:
            c = frame.clause
            name, arity = c.indicator
            if c.span is not None:
                out.append(f"{name}/{arity} (line {c.span.line}): {c.span.first_line.strip()}")
            else:
                out.append(f"{name}/{arity}")
            frame = frame.parent
        return out

    def _error(self, kind: str, message: str, frame: Optional[_Frame]) -> EngineError:
        line = text = src = None
        if frame is not None and frame.clause.span is not None:
            span = frame.clause.span
            line, text, src = span.line, span.first_line, span.source
        return EngineError(kind, message, line=line, col=1 if line else None, line_text=text, trace=self._trace(frame), source=src)

    # solving

    def run(self, goals: Sequence[Goal], depth: int = 0) -> Iterator[None]:
        """Yield once per proof of ``goals``; bindings are live at each yield."""
        cont: Cont = None
        for g in reversed(goals):
            cont = (g, depth, None, cont)
        return self._machine(cont)

    def _machine(self, cont: Cont) -> Iterator[None]:
        stack: List[Tuple[int, Iterator[Cont]]] = []
        ok = True
        while True:
            if ok:
                if cont is None:
                    yield None
                    ok = False
                    continue
                goal, depth, frame, rest = cont
                ok, cont = self._step(goal, depth, frame, rest, stack)
                continue
            while stack:
                mark, alts = stack[-1]
                self._undo(mark)
                nxt = next(alts, _DONE)
                if nxt is _DONE:
                    stack.pop()
                    continue
                cont = nxt
                ok = True
                break
            else:
                return

    def _step(self, goal: Goal, depth: int, frame: Optional[_Frame], rest: Cont, stack) -> Tuple[bool, Cont]:
        if type(goal) is Call:
            term = self.walk(goal.term)
            kt = type(term)
            if kt is Var:
                raise self._error(INSTANTIATION_ERROR, "goal is an unbound variable", frame)
            if kt is Struct:
                key = (term.functor, len(term.args))
            elif kt is Atom:
                key = (term.name, 0)
            else:
                raise self._error(TYPE_ERROR, f"{self.resolve(term)} is not callable", frame)
            if not self.program.defines(key):
                raise self._error(EXISTENCE_ERROR, f"unknown procedure {key[0]}/{key[1]}", frame)
            if depth + 1 > self.max_depth:
                raise self._error(DEPTH_LIMIT, f"depth limit {self.max_depth} exceeded calling {key[0]}/{key[1]}", frame)
            first = self.walk(term.args[0]) if kt is Struct else None
            clauses = self.program.candidates(key, first)
            stack.append((len(self.trail), self._clause_alts(term, clauses, depth + 1, frame, rest)))
            return False, None
        if type(goal) is Compare:
            return self._compare(goal, frame), rest
        if isinstance(goal, Not):
            return self._negate(goal.goal, depth, frame), rest
        return self._builtin(goal, depth, frame, rest, stack)

    def _clause_alts(self, term: Term, clauses: List[Clause], depth: int, parent: Optional[_Frame], rest: Cont) -> Iterator[Cont]:
        mark = len(self.trail)
        for clause in clauses:
            if not self._may_match(clause.head, term):
                continue
            m: Dict[Var, Term] = {}
            if self._unify_head(clause.head, term, m):
                cont = rest
                if clause.body:
                    frame = _Frame(clause, parent)
                    for g in reversed(clause.body):
                        cont = (self._rename_goal(g, m), depth, frame, cont)
                yield cont
            else:
                self._undo(mark)

    def _unify_head(self, head: Term, term: Term, m: Dict[Var, Term]) -> bool:
        """Unify a clause head, as if freshly renamed, with a goal term.

        Rather than copying the head first, each clause variable is mapped
        in ``m`` straight to the goal subterm it meets; the body is then
        renamed through ``m``. Only head subterms that end up bound to goal
        variables are copied.
        """
        if type(head) is not Struct:
            return True
        b = self.bindings
        stack = list(zip(head.args, term.args))
        while stack:
            h, t = stack.pop()
            kh = type(h)
            if kh is Var:
                r = m.get(h)
                if r is None:
                    m[h] = t
                elif not self.unify(r, t):
                    return False
                continue
            while type(t) is Var:
                nxt = b.get(t)
                if nxt is None:
                    break
                t = nxt
            kt = type(t)
            if kt is Var:
                if (kh is Struct or kh is PList) and not h.ground:
                    h = self._rename_term(h, m)
                    if self._occurs(t, h):
                        return False
                self._bind(t, h)
            elif kh is not kt:
                return False
            elif kh is Struct:
                if h.functor != t.functor or len(h.args) != len(t.args):
                    return False
                if h.ground and t.ground:
                    if h != t:
                        return False
                else:
                    stack.extend(zip(h.args, t.args))
            elif kh is PList:
                if len(h.items) != len(t.items):
                    return False
                stack.extend(zip(h.items, t.items))
            elif h != t:
                return False
        return True

    def _may_match(self, head: Term, term: Term) -> bool:
        """Cheap first-level test that rules out most clauses before renaming."""
        if type(head) is not Struct:
            return True
        b = self.bindings
        for h, t in zip(head.args, term.args):
            if type(h) is Var:
                continue
            while type(t) is Var:
                nxt = b.get(t)
                if nxt is None:
                    break
                t = nxt
            if type(t) is Var:
                continue
            if type(h) is not type(t):
                return False
            if type(h) is Struct:
                if h.functor != t.functor or len(h.args) != len(t.args):
                    return False
            elif type(h) is PList:
                if len(h.items) != len(t.items):
                    return False
            elif h != t:
                return False
        return True

    def _compare(self, goal: Compare, frame: Optional[_Frame]) -> bool:
        if goal.op == "=":
            return self.unify(goal.left, goal.right)
        if goal.op == "\\=":
            mark = len(self.trail)
            unifies = self.unify(goal.left, goal.right)
            self._undo(mark)
            return not unifies
        left, right = self.walk(goal.left), self.walk(goal.right)
        if type(left) is Int and type(right) is Int:
            a, b = left.value, right.value
            op = goal.op
            if op == ">":
                return a > b
            if op == "<":
                return a < b
            if op == ">=":
                return a >= b
            return a <= b
        for side in (left, right):
            if isinstance(side, Var):
                raise self._error(INSTANTIATION_ERROR, f"unbound operand in {goal}", frame)
            if not isinstance(side, Int):
                raise self._error(TYPE_ERROR, f"integer expected in comparison, found {self.resolve(side)}", frame)
        a, b = left.value, right.value
        if goal.op == ">":
            return a > b
        if goal.op == "<":
            return a < b
        if goal.op == ">=":
            return a >= b
        return a <= b

    def _free_vars(self, goal: Goal) -> List[Var]:
        return self._free_vars_in(goal_terms(goal))

    def _free_vars_in(self, terms: Sequence[Term]) -> List[Var]:
        out = []
        for t in terms:
            stack = [t]
            while stack:
                x = self.walk(stack.pop())
                if isinstance(x, Var):
                    out.append(x)
                elif isinstance(x, Struct):
                    stack.extend(x.args)
                elif isinstance(x, PList):
                    stack.extend(x.items)
        return out

    def _negate(self, inner: Goal, depth: int, frame: Optional[_Frame]) -> bool:
        # variables named with a leading underscore are local to the negation
        named = [v for v in self._free_vars(inner) if not v.anonymous]
        if named:
            raise self._error(INSTANTIATION_ERROR, f"negated goal is not ground: not {self._show(inner)}", frame)
        mark = len(self.trail)
        sub = self._machine((inner, depth, frame, None))
        try:
            proved = next(sub, _DONE) is not _DONE
        finally:
            sub.close()
            self._undo(mark)
        return not proved

    def _show(self, goal: Goal) -> str:
        if isinstance(goal, Call):
            return str(self.resolve(goal.term))
        if isinstance(goal, Builtin):
            return str(Struct(goal.name, tuple(self.resolve(a) for a in goal.args)))
        if isinstance(goal, Compare):
            return f"{self.resolve(goal.left)} {goal.op} {self.resolve(goal.right)}"
        return f"not {self._show(goal.goal)}"

    def _list_arg(self, t: Term, name: str, frame: Optional[_Frame]) -> PList:
        t = self.walk(t)
        if isinstance(t, Var):
            raise self._error(INSTANTIATION_ERROR, f"{name}: list argument is unbound", frame)
        if not isinstance(t, PList):
            raise self._error(TYPE_ERROR, f"{name}: list expected, found {self.resolve(t)}", frame)
        return t

    def _builtin(self, goal: Builtin, depth: int, frame: Optional[_Frame], rest: Cont, stack) -> Tuple[bool, Cont]:
        name, args = goal.name, goal.args
        if name == "ground":
            return not self._free_vars_in(args), rest
        if name == "member":
            items = self._list_arg(args[1], "member/2", frame).items
            stack.append((len(self.trail), self._member_alts(args[0], items, rest)))
            return False, None
        if name == "rand_member":
            lst = self._list_arg(args[1], "rand_member/2", frame)
            if self._free_vars_in(lst.items):
                raise self._error(INSTANTIATION_ERROR, "rand_member/2: list must be ground", frame)
            if not lst.items:
                return False, None
            pick = lst.items[self.rng.randrange(len(lst.items))]
            return self.unify(args[0], pick), rest
        if name == "findall":
            return self._findall(args, depth, frame), rest
        raise self._error(EXISTENCE_ERROR, f"unknown builtin {name}/{len(args)}", frame)

    def _member_alts(self, x: Term, items: Tuple[Term, ...], rest: Cont) -> Iterator[Cont]:
        mark = len(self.trail)
        for item in items:
            if self.unify(x, item):
                yield rest
            else:
                self._undo(mark)

    def _findall(self, args: Tuple[Term, ...], depth: int, frame: Optional[_Frame]) -> bool:
        template, goal_t, result = args
        goal_t = self.walk(goal_t)
        if isinstance(goal_t, Var):
            raise self._error(INSTANTIATION_ERROR, "findall/3: goal is unbound", frame)
        try:
            inner = goal_from_term(self.resolve(goal_t))
        except TypeError:
            raise self._error(TYPE_ERROR, f"findall/3: {self.resolve(goal_t)} is not callable", frame) from None
        mark = len(self.trail)
        found: List[Term] = []
        sub = self._machine((inner, depth, frame, None))
        try:
            for _ in sub:
                found.append(self._copy(self.resolve(template)))
        finally:
            sub.close()
            self._undo(mark)
        return self.unify(result, PList(tuple(found)))

    def _copy(self, t: Term) -> Term:
        return self._rename_term(t, {})


QueryLike = Union[str, Sequence[Goal], Term]


def _as_goals(query: QueryLike) -> List[Goal]:
    if isinstance(query, str):
        return parse_query(query)
    if isinstance(query, (Struct, Atom)):
        return [goal_from_term(query)]
    return list(query)


def query_variables(goals: Sequence[Goal]) -> List[Var]:
    seen: Dict[Var, None] = {}
    for g in goals:
        for t in goal_terms(g):
            for v in variables(t):
                if v.name != "_":
                    seen.setdefault(v)
    return list(seen)


def solve(
    program: Program,
    query: QueryLike,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_solutions: Optional[int] = None,
    rng: Optional[random.Random] = None,
) -> Iterator[Dict[str, Term]]:
    """Lazily enumerate answers to ``query`` against ``program``.

    Each answer maps the query's variable names to their (resolved)
    bindings. Errors surface as EngineError while iterating.
    """
    goals = _as_goals(query)
    qvars = query_variables(goals)
    engine = Engine(program, max_depth=max_depth, rng=rng)
    count = 0
    for _ in engine.run(goals):
        yield {v.name: engine.resolve(v) for v in qvars}
        count += 1
        if max_solutions is not None and count >= max_solutions:
            return


def solve_all(program: Program, query: QueryLike, **kwargs) -> List[Dict[str, Term]]:
    return list(solve(program, query, **kwargs))


def holds(program: Program, query: QueryLike, **kwargs) -> bool:
    """True iff ``query`` has at least one proof."""
    return next(solve(program, query, max_solutions=1, **kwargs), None) is not None
