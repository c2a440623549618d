"""Command-line front end: parse input files, run checks, emit reports.

Every command produces a deterministic report: one line per check, sorted by
check id.  Exit status is 0 when everything passed, 1 when any check failed,
2 on usage or parse errors.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

from . import category, interpret, powerview
from .core import DbcatError, bottom_instance, format_extension, is_empty_isomorphic
from .dsl import ParseError, Workspace, parse_rule_text, parse_workspace
from .queries import QueryError, eval_rule
from .schemas import SAtom, build_sketch
from .category import ModeViolation, ViewMap


@dataclass
class Report:
    command: str
    lines: tuple  # (check id, "PASS" | "FAIL", detail)

    @property
    def status(self) -> int:
        return 0 if all(v == "PASS" for _, v, _ in self.lines) else 1

    def render(self, fmt: str = "text") -> str:
        lines = sorted(self.lines)
        if fmt == "lines":
            return "\n".join(f"{cid}\t{verdict}\t{detail}" for cid, verdict, detail in lines)
        width = max((len(cid) for cid, _, _ in lines), default=0)
        body = [f"{cid.ljust(width)}  {verdict}  {detail}" for cid, verdict, detail in lines]
        summary = "all checks passed" if self.status == 0 else "some checks FAILED"
        return "\n".join([f"== {self.command} =="] + body + [summary])


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _instance(ws: Workspace, name: str):
    if name not in ws.instances:
        raise DbcatError(f"unknown instance {name!r}")
    return ws.instances[name][1]


def _interpretation_for_graph(ws: Workspace, graph):
    """One declared instance per atomic schema appearing in the graph."""
    wanted = set()
    for _, term in graph.nodes:
        stack = [term]
        while stack:
            t = stack.pop()
            if isinstance(t, SAtom):
                wanted.add(t.schema.name)
            elif hasattr(t, "left"):
                stack.extend((t.left, t.right))
    assign = {}
    for inst_name, (term_name, inst) in sorted(ws.instances.items()):
        if term_name in wanted:
            if term_name in assign:
                raise DbcatError(
                    f"two instances declared for schema {term_name!r}; keep exactly one"
                )
            assign[term_name] = inst
    missing = wanted - set(assign)
    if missing:
        raise DbcatError(f"no instance declared for schemas {sorted(missing)}")
    return interpret.interpretation(assign, ws.schemas)


def _mapping_morphism(ws: Workspace, mapping_name: str, src: str, tgt: str):
    if mapping_name not in ws.mappings:
        raise DbcatError(f"unknown mapping {mapping_name!r}")
    m = ws.mappings[mapping_name]
    source, target = _instance(ws, src), _instance(ws, tgt)
    mode = "exact" if m.exact else "inclusion"
    vms = []
    for p in m.pairs:
        if not target.has(p.rhs_name):
            raise DbcatError(
                f"mapping {mapping_name}: right side {p.rhs_name!r} is not a "
                f"relation of instance {tgt!r}"
            )
        vms.append(ViewMap(p.lhs, p.rhs_name, mode))
    return category.make_atomic(vms, source, target)


def run(command: str, args, ws: Workspace, depth, max_arity, cap) -> Report:
    """Dispatch one command against a parsed workspace."""
    lines = []
    if command == "eval":
        inst = _instance(ws, args[0])
        rule = parse_rule_text(args[1])
        try:
            result = eval_rule(rule, inst)
            lines.append((f"eval {args[0]}", "PASS", format_extension(result.tuples)))
        except QueryError as exc:
            lines.append((f"eval {args[0]}", "FAIL", str(exc)))
    elif command == "powerview":
        vs = powerview.power_view(_instance(ws, args[0]), depth, max_arity, cap)
        for comp, views in vs.serialize():
            lines.append((f"powerview {args[0]} c{comp}", "PASS", " ".join(views)))
        lines.append(
            (
                f"powerview {args[0]} closure",
                "PASS",
                "fixpoint" if vs.fixpoint else f"bounded at depth {vs.depth}",
            )
        )
    elif command == "iso":
        a, b = _instance(ws, args[0]), _instance(ws, args[1])
        ok = powerview.instances_isomorphic(a, b, depth, max_arity, cap)
        lines.append((f"iso {args[0]} {args[1]}", _verdict(ok), "same views" if ok else "views differ"))
    elif command == "flux":
        try:
            m = _mapping_morphism(ws, args[0], args[1], args[2])
            fx = category.flux(m, depth, max_arity, cap)
            for s, t, views in fx.serialize():
                lines.append((f"flux {args[0]} c{s}->c{t}", "PASS", " ".join(views)))
        except ModeViolation as exc:
            lines.append((f"flux {args[0]}", "FAIL", str(exc)))
    elif command == "compose":
        try:
            f = _mapping_morphism(ws, args[0], args[2], args[3])
            g = _mapping_morphism(ws, args[1], args[3], args[4])
            h = category.compose(g, f)
            lines.append((f"compose {args[1]}.{args[0]} kind", "PASS", h.kind))
            fx = category.flux(h, depth, max_arity, cap)
            for s, t, views in fx.serialize():
                lines.append(
                    (f"compose {args[1]}.{args[0]} flux c{s}->c{t}", "PASS", " ".join(views))
                )
        except ModeViolation as exc:
            lines.append((f"compose {args[1]}.{args[0]}", "FAIL", str(exc)))
    elif command == "laws":
        lines.extend(_law_suite(ws, depth, max_arity, cap))
    elif command == "check-model":
        graph = _graph(ws, args[0])
        sketch = build_sketch(graph)
        alpha = _interpretation_for_graph(ws, graph)
        report = interpret.check_model(alpha, graph, sketch)
        for cid, ok, detail in report.lines():
            lines.append((cid, _verdict(ok), detail))
        lines.append(("model", _verdict(report.is_model), "interpretation is a model" if report.is_model else "not a model"))
    elif command == "check-functor":
        graph = _graph(ws, args[0])
        sketch = build_sketch(graph)
        alpha = _interpretation_for_graph(ws, graph)
        report = interpret.check_functor(alpha, sketch, depth, max_arity, cap)
        for cid, ok, detail in report.lines():
            lines.append((cid, _verdict(ok), detail))
        lines.append(
            (
                "functor",
                _verdict(report.passed),
                "interpretation extends to a functor" if report.passed else "functorial requirement fails",
            )
        )
    elif command == "gamma-iso":
        graph = _graph(ws, args[0])
        sketch = build_sketch(graph)
        alpha = _interpretation_for_graph(ws, graph)
        for node, _ in graph.nodes:
            ok = interpret.check_gamma_iso(alpha, sketch, node, depth, max_arity, cap)
            lines.append(
                (f"gamma-iso {node}", _verdict(ok), "enlargement adds no views" if ok else "enlargement changes the view closure")
            )
    elif command == "duality":
        a, b = _instance(ws, args[0]), _instance(ws, args[1])
        report = category.verify_duality(a, b, depth=depth, max_arity=max_arity, cap=cap)
        for cid, ok, detail in report.checks:
            lines.append((f"duality {cid}", _verdict(ok), detail))
        lines.append(("duality note", "PASS", report.note))
    else:
        raise DbcatError(f"unknown command {command!r}")
    return Report(command, tuple(lines))


def _graph(ws: Workspace, name: str):
    if name not in ws.graphs:
        raise DbcatError(f"unknown graph {name!r}")
    return ws.graphs[name]


def _law_suite(ws: Workspace, depth, max_arity, cap):
    """A small built-in law battery over the workspace's declared instances."""
    lines = []
    insts = sorted(ws.instances.items())
    bot = bottom_instance()
    vs_bot = powerview.power_view(bot, depth, max_arity, cap)
    lines.append(
        (
            "laws bottom-closure",
            _verdict(len(vs_bot) == 1),
            "views of the bottom instance are just the empty view",
        )
    )
    for name, (_, inst) in insts:
        vs = powerview.power_view(inst, depth, max_arity, cap)
        contains_all = all(
            r.tuples in vs or not r.tuples for r in inst.relations
        )
        lines.append((f"laws contains-source {name}", _verdict(contains_all), "instance relations appear among views"))
        lines.append(
            (
                f"laws empty-vs-bottom {name}",
                _verdict(
                    powerview.instances_isomorphic(inst, bot, depth, max_arity, cap)
                    == is_empty_isomorphic(inst)
                ),
                "empty instances collapse to the bottom object",
            )
        )
        ident = category.identity(inst)
        lines.append(
            (
                f"laws identity-flux {name}",
                _verdict(category.flux(ident, depth, max_arity, cap).matches_view_set(vs)),
                "identity transmits the whole view closure",
            )
        )
    for (n1, (_, a)), (n2, (_, b)) in zip(insts, insts[1:]):
        rep = category.verify_duality(a, b, depth=depth, max_arity=max_arity, cap=cap)
        lines.append(
            (
                f"laws duality {n1}+{n2}",
                _verdict(rep.passed),
                "coproduct doubles as product",
            )
        )
    return lines


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dbcat",
        description="view-based database mappings: queries, closures, morphisms, model checks",
    )
    parser.add_argument("command", help="eval | powerview | iso | flux | compose | laws | check-model | check-functor | gamma-iso | duality")
    parser.add_argument("args", nargs="*", help="command arguments")
    parser.add_argument("--input", "-i", action="append", default=[], help="input file (repeatable)")
    parser.add_argument("--depth", type=int, default=powerview.DEFAULT_DEPTH, help="closure depth bound (-1 runs to fixpoint)")
    parser.add_argument("--arity", type=int, default=powerview.DEFAULT_MAX_ARITY, help="closure arity bound")
    parser.add_argument("--cap", type=int, default=powerview.DEFAULT_CAP, help="view count budget")
    parser.add_argument("--format", choices=("text", "lines"), default="text")
    ns = parser.parse_args(argv)

    depth = None if ns.depth < 0 else ns.depth
    try:
        ws = parse_workspace(ns.input)
    except (ParseError, OSError) as exc:
        print(f"dbcat: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(ns.command, ns.args, ws, depth, ns.arity, ns.cap)
    except (DbcatError, IndexError) as exc:
        print(f"dbcat: {exc}", file=sys.stderr)
        return 2
    print(report.render(ns.format))
    return report.status


if __name__ == "__main__":
    sys.exit(main())
