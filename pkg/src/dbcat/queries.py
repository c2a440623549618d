"""SPJRU algebra terms and rule-based conjunctive queries over finite instances.

Both query styles evaluate under plain set semantics.  Terms are evaluated by
structural recursion over the algebra; rules are evaluated by a unification
style matcher over the body atoms.  The two routes are tied together by
:func:`rule_to_spjru`, which compiles a rule into an equivalent term.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .core import DbcatError, Instance, Relation, Value, value_key


class QueryError(DbcatError):
    pass


class UnknownRelation(QueryError):
    pass


class QueryArityError(QueryError):
    pass


class CrossComponentQuery(QueryError):
    """A query touched relations in distinct components of a separated instance."""


class TranslationError(QueryError):
    pass


# ---------------------------------------------------------------------------
# rule syntax


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: Value

    def __repr__(self):
        return repr(self.value)


RuleTerm = Var | Const


@dataclass(frozen=True)
class RelAtom:
    name: str
    args: tuple

    def variables(self) -> tuple:
        return tuple(a for a in self.args if isinstance(a, Var))


@dataclass(frozen=True)
class Builtin:
    """Built-in predicate: ``=`` or ``<=`` over the total value order."""

    op: str
    left: RuleTerm
    right: RuleTerm

    def __post_init__(self):
        if self.op not in ("=", "<="):
            raise QueryError(f"unsupported built-in {self.op!r}")

    def variables(self) -> tuple:
        return tuple(a for a in (self.left, self.right) if isinstance(a, Var))


Atom = RelAtom | Builtin


@dataclass(frozen=True)
class Rule:
    """Conjunctive query ``head(vars) <- atom, atom, ...``."""

    head_name: str
    head_vars: tuple
    body: tuple

    def __post_init__(self):
        if not any(isinstance(a, RelAtom) for a in self.body):
            raise QueryError("rule body needs at least one relation atom")
        body_vars = {v.name for a in self.body for v in a.variables()}
        for v in self.head_vars:
            if not isinstance(v, Var):
                raise QueryError("head arguments must be variables")
            if v.name not in body_vars:
                raise QueryError(f"head variable {v.name} does not occur in the body")

    def relation_names(self) -> frozenset:
        return frozenset(a.name for a in self.body if isinstance(a, RelAtom))

    def constants(self) -> frozenset:
        out = set()
        for a in self.body:
            if isinstance(a, RelAtom):
                out.update(t.value for t in a.args if isinstance(t, Const))
            else:
                out.update(t.value for t in (a.left, a.right) if isinstance(t, Const))
        return frozenset(out)

    def rename_relations(self, mapping: dict) -> "Rule":
        body = tuple(
            RelAtom(mapping.get(a.name, a.name), a.args) if isinstance(a, RelAtom) else a
            for a in self.body
        )
        return Rule(self.head_name, self.head_vars, body)


def rule(head_name: str, head_vars, body) -> Rule:
    """Convenience constructor accepting variable names as bare strings."""

    def term(x):
        if isinstance(x, (Var, Const)):
            return x
        if isinstance(x, str) and x[:1].isupper():
            return Var(x)
        return Const(x)

    hv = tuple(Var(v) if isinstance(v, str) else v for v in head_vars)
    atoms = []
    for a in body:
        if isinstance(a, (RelAtom, Builtin)):
            atoms.append(a)
        elif a[0] in ("=", "<="):
            atoms.append(Builtin(a[0], term(a[1]), term(a[2])))
        else:
            atoms.append(RelAtom(a[0], tuple(term(x) for x in a[1:])))
    return Rule(head_name, hv, tuple(atoms))


# ---------------------------------------------------------------------------
# algebra terms


@dataclass(frozen=True)
class ColEq:
    left: int
    right: int


@dataclass(frozen=True)
class ConstEq:
    col: int
    value: Value


Condition = ColEq | ConstEq


@dataclass(frozen=True)
class BaseRel:
    name: str


@dataclass(frozen=True)
class Select:
    child: "QueryTerm"
    conds: tuple


@dataclass(frozen=True)
class Project:
    child: "QueryTerm"
    cols: tuple


@dataclass(frozen=True)
class Join:
    left: "QueryTerm"
    right: "QueryTerm"
    pairs: tuple = ()


@dataclass(frozen=True)
class Rename:
    child: "QueryTerm"
    perm: tuple


@dataclass(frozen=True)
class Union:
    left: "QueryTerm"
    right: "QueryTerm"


QueryTerm = BaseRel | Select | Project | Join | Rename | Union


def _eval(t, inst: Instance):
    """Returns (tuples, arity, component or None)."""
    if isinstance(t, BaseRel):
        if not inst.has(t.name):
            raise UnknownRelation(f"unknown relation {t.name!r}")
        r = inst.relation(t.name)
        return set(r.tuples), r.arity, inst.component_of(t.name)
    if isinstance(t, Select):
        tuples, arity, comp = _eval(t.child, inst)
        for c in t.conds:
            if isinstance(c, ColEq):
                if not (0 <= c.left < arity and 0 <= c.right < arity):
                    raise QueryArityError("selection column out of range")
                tuples = {x for x in tuples if x[c.left] == x[c.right]}
            else:
                if not 0 <= c.col < arity:
                    raise QueryArityError("selection column out of range")
                tuples = {x for x in tuples if x[c.col] == c.value}
        return tuples, arity, comp
    if isinstance(t, Project):
        tuples, arity, comp = _eval(t.child, inst)
        if any(not 0 <= c < arity for c in t.cols):
            raise QueryArityError("projection column out of range")
        return {tuple(x[c] for c in t.cols) for x in tuples}, len(t.cols), comp
    if isinstance(t, Rename):
        tuples, arity, comp = _eval(t.child, inst)
        if sorted(t.perm) != list(range(arity)):
            raise QueryArityError("rename must be a permutation of the columns")
        return {tuple(x[c] for c in t.perm) for x in tuples}, arity, comp
    if isinstance(t, Join):
        lt, la, lc = _eval(t.left, inst)
        rt, ra, rc = _eval(t.right, inst)
        _check_same_component(lc, rc)
        out = set()
        for x in lt:
            for y in rt:
                if all(x[i] == y[j] for i, j in t.pairs):
                    out.add(x + y)
        return out, la + ra, lc if lc is not None else rc
    if isinstance(t, Union):
        lt, la, lc = _eval(t.left, inst)
        rt, ra, rc = _eval(t.right, inst)
        if la != ra:
            raise QueryArityError("union of different arities")
        _check_same_component(lc, rc)
        return lt | rt, la, lc if lc is not None else rc
    raise QueryError(f"not a query term: {t!r}")


def _check_same_component(lc, rc):
    if lc is not None and rc is not None and lc != rc:
        raise CrossComponentQuery(
            f"query combines relations from separated components {lc} and {rc}"
        )


def eval_spjru(t, inst: Instance, name: str = "view") -> Relation:
    """Evaluate an algebra term over an instance under set semantics."""
    tuples, arity, _ = _eval(t, inst)
    return Relation(name, arity, frozenset(tuples))


# ---------------------------------------------------------------------------
# rule evaluation


def _relation_atoms(body):
    return [a for a in body if isinstance(a, RelAtom)]


def _check_components(body, inst: Instance):
    comps = set()
    for a in _relation_atoms(body):
        if not inst.has(a.name):
            raise UnknownRelation(f"unknown relation {a.name!r}")
        if inst.relation(a.name).arity != len(a.args):
            raise QueryArityError(f"atom {a.name} has wrong arity")
        comps.add(inst.component_of(a.name))
    if len(comps) > 1:
        raise CrossComponentQuery(
            f"rule body spans separated components {sorted(comps)}"
        )
    return comps.pop() if comps else None


def _holds(b: Builtin, env: dict) -> bool:
    left = env[b.left.name] if isinstance(b.left, Var) else b.left.value
    right = env[b.right.name] if isinstance(b.right, Var) else b.right.value
    if b.op == "=":
        return left == right
    return value_key(left) <= value_key(right)


def match_atoms(body, inst: Instance, domain: frozenset, env: dict | None = None):
    """Yield every assignment of the body variables that satisfies all atoms.

    Relation atoms bind variables by scanning tuples; variables not bound by
    any relation atom range over *domain*.  Built-ins are checked as soon as
    both sides are bound.
    """
    rel_atoms = _relation_atoms(body)
    builtins = [a for a in body if isinstance(a, Builtin)]
    free = sorted(
        {v.name for a in builtins for v in a.variables()}
        - {v.name for a in rel_atoms for v in a.variables()}
        - set(env or {})
    )

    def ready(env):
        return [
            b
            for b in builtins
            if all(not isinstance(t, Var) or t.name in env for t in (b.left, b.right))
        ]

    def extend(i, env):
        if i == len(rel_atoms):
            if not free:
                yield dict(env)
                return
            for combo in itertools.product(sorted(domain, key=value_key), repeat=len(free)):
                env2 = dict(env)
                env2.update(zip(free, combo))
                yield env2
            return
        atom = rel_atoms[i]
        for t in inst.relation(atom.name).tuples:
            env2 = dict(env)
            ok = True
            for arg, v in zip(atom.args, t):
                if isinstance(arg, Const):
                    if arg.value != v:
                        ok = False
                        break
                elif arg.name in env2:
                    if env2[arg.name] != v:
                        ok = False
                        break
                else:
                    env2[arg.name] = v
            if ok and all(_holds(b, env2) for b in ready(env2)):
                yield from extend(i + 1, env2)

    for env_out in extend(0, dict(env or {})):
        if all(_holds(b, env_out) for b in builtins):
            yield env_out


def rule_valuation_domain(q: Rule, inst: Instance) -> frozenset:
    """Domain for unbound rule variables: the queried component's active values
    plus any constants mentioned by the rule itself."""
    comp = _check_components(q.body, inst)
    values = set(q.constants())
    for r in inst.relations:
        if comp is None or inst.component_of(r.name) == comp:
            for t in r.tuples:
                values.update(t)
    return frozenset(values)


def eval_rule(q: Rule, inst: Instance) -> Relation:
    """Evaluate a conjunctive rule: all head images of satisfying valuations."""
    domain = rule_valuation_domain(q, inst)
    out = set()
    for env in match_atoms(q.body, inst, domain):
        out.add(tuple(env[v.name] for v in q.head_vars))
    return Relation(q.head_name, len(q.head_vars), frozenset(out))


# ---------------------------------------------------------------------------
# rule -> algebra translation


def rule_to_spjru(q: Rule):
    """Compile a rule into an algebra term computing the same extension.

    Relation atoms become a left-deep cartesian join; repeated variables,
    embedded constants, and ``=`` built-ins become selections; the head
    becomes a projection.  Rules using ``<=`` have no counterpart in the
    equality-only selection language and are rejected.
    """
    rel_atoms = _relation_atoms(q.body)
    builtins = [a for a in q.body if isinstance(a, Builtin)]
    if any(b.op == "<=" for b in builtins):
        raise TranslationError("<= built-ins cannot be translated to the algebra")

    term = BaseRel(rel_atoms[0].name)
    offsets = [0]
    width = len(rel_atoms[0].args)
    for a in rel_atoms[1:]:
        term = Join(term, BaseRel(a.name), ())
        offsets.append(width)
        width += len(a.args)

    first_col: dict = {}
    conds = []
    for atom, off in zip(rel_atoms, offsets):
        for pos, arg in enumerate(atom.args):
            col = off + pos
            if isinstance(arg, Const):
                conds.append(ConstEq(col, arg.value))
            elif arg.name in first_col:
                conds.append(ColEq(first_col[arg.name], col))
            else:
                first_col[arg.name] = col

    contradiction = False
    for b in builtins:
        sides = []
        for t in (b.left, b.right):
            if isinstance(t, Var):
                if t.name not in first_col:
                    raise TranslationError(
                        f"variable {t.name} occurs only in built-ins; not translatable"
                    )
                sides.append(("col", first_col[t.name]))
            else:
                sides.append(("const", t.value))
        kinds = (sides[0][0], sides[1][0])
        if kinds == ("col", "col"):
            conds.append(ColEq(sides[0][1], sides[1][1]))
        elif kinds == ("col", "const"):
            conds.append(ConstEq(sides[0][1], sides[1][1]))
        elif kinds == ("const", "col"):
            conds.append(ConstEq(sides[1][1], sides[0][1]))
        elif sides[0][1] != sides[1][1]:
            contradiction = True

    if contradiction:
        # two selections on the same column with different constants: empty
        conds = [ConstEq(0, 0), ConstEq(0, 1)]
    if conds:
        term = Select(term, tuple(conds))
    return Project(term, tuple(first_col[v.name] for v in q.head_vars))
