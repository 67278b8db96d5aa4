"""Command line front end: ``iss validate|simulate|enforce|verify|audit``.

Exit status is 0 on success, 1 when the input is rejected or a check fails
in the domain sense, and 2 for I/O and usage problems.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import behavior, coordination, dsl, norms, verify
from .errors import DslError, InvalidPolicy, IssError, NormUnenforceable, QuerySyntaxError, RegimentationDeadlock

DEFAULT_SCENARIO = "abc.iss"


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        self.code = code
        self.message = message


def bundled_scenario(name: str = DEFAULT_SCENARIO) -> str:
    return (resources.files("isskit") / "scenarios" / name).read_text(encoding="utf-8")


# -- output -----------------------------------------------------------------


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "-"
    if isinstance(v, (list, tuple)):
        v = ",".join(map(str, v))
    v = str(v)
    if v == "" or any(c in v for c in " \t\n\"=\\"):
        return json.dumps(v)
    return v


class Output:
    def __init__(self, fmt: str, verbose: bool = False, stream=None):
        self.fmt = fmt
        self.verbose = verbose
        self.stream = stream or sys.stdout
        self.color = (
            fmt == "human" and os.environ.get("ISS_COLOR", "1") != "0" and self.stream.isatty()
        )

    def paint(self, text: str, good: bool | None) -> str:
        if not self.color or good is None:
            return text
        return f"\033[{32 if good else 31}m{text}\033[0m"

    def record(self, record_type: str, /, **fields):
        if self.fmt == "records":
            parts = [f"record={record_type}"] + [f"{k}={_value(v)}" for k, v in fields.items()]
            print(" ".join(parts), file=self.stream)

    def say(self, text: str = "", good: bool | None = None, verbose: bool = False):
        if self.fmt == "human" and (self.verbose or not verbose):
            print(self.paint(text, good), file=self.stream)


# -- shared helpers ---------------------------------------------------------


def _load(args, out: Output) -> tuple[dsl.Lowered, dsl.Document, str]:
    if args.model is None:
        text, name = bundled_scenario(), DEFAULT_SCENARIO
    else:
        try:
            text = Path(args.model).read_bytes().decode("utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise _Exit(2, f"cannot read {args.model}: {exc}")
        name = args.model
    try:
        doc = dsl.parse(text, name)
        low = dsl.lower(doc)
    except DslError as exc:
        for d in exc.diagnostics:
            _diag(out, d)
            print(str(d), file=sys.stderr)
        raise _Exit(1)
    return low, doc, name


def _diag(out: Output, d: dsl.Diagnostic):
    out.record("diagnostic", severity=d.severity, code=d.code, at=str(d.span), message=d.message, hint=d.hint)


def _pick_norm(low: dsl.Lowered, name: str | None, fallback: str | None = None) -> norms.NormMonitor:
    try:
        return low.norm(name or fallback)
    except KeyError as exc:
        raise _Exit(2 if name else 1, str(exc.args[0]))


def _selected_norms(low: dsl.Lowered, name: str | None) -> list[norms.NormMonitor]:
    return [_pick_norm(low, name)] if name else list(low.norms)


def _emit_lasso(out: Output, m, lam: behavior.Lasso, label: str):
    for phase, steps in (("stem", lam.stem.steps), ("cycle", lam.cycle)):
        for i, s in enumerate(steps):
            out.record(
                "step", lasso=label, phase=phase, index=i, source=m.states[s.source],
                joint=m.format_joint(s.action), target=m.states[m.outcome[(s.source, s.action)]],
            )
    for line in behavior.format_lasso(m, lam).splitlines():
        out.say("  " + line)


# -- subcommands ------------------------------------------------------------


def cmd_validate(args, out: Output) -> int:
    low, doc, name = _load(args, out)
    m = low.model
    kinds = [p.kind for p in doc.policies]
    out.record(
        "model", file=name, agents=m.n_agents, resources=m.n_resources, states=m.n_states,
        actions=len(m.actions), transitions=len(m.outcome), norms=[n.name for n in low.norms],
        policies=kinds, warnings=len(low.warnings),
    )
    for d in low.warnings:
        _diag(out, d)
    out.say(
        f"{name}: valid; {m.n_agents} agents, {m.n_resources} resources, {m.n_states} states, "
        f"{len(m.outcome)} transitions, norms: {', '.join(n.name for n in low.norms) or 'none'}",
        True,
    )
    if low.warnings:
        out.say(f"{len(low.warnings)} warnings" + ("" if args.verbose else " (-v lists them)"))
        for d in low.warnings:
            out.say("  " + str(d), verbose=True)
    return 0


def _read_strategy(path: str, m) -> dict[tuple[int, int], int]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise _Exit(2, f"cannot read {path}: {exc}")
    profile = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise _Exit(2, f"{path}:{n}: expected 'agent state action'")
        try:
            profile[(m.agent_id(parts[0]), m.state_id(parts[1]))] = m.action_id(parts[2])
        except (KeyError, ValueError) as exc:
            raise _Exit(1, f"{path}:{n}: {exc}")
    return profile


def cmd_simulate(args, out: Output) -> int:
    low, _, _ = _load(args, out)
    m = low.model
    mons = _selected_norms(low, args.norm)
    try:
        starts = [m.state_id(args.start)] if args.start else list(m.initial)
    except KeyError:
        raise _Exit(1, f"unknown state {args.start!r}")

    if args.enumerate is not None:
        if args.enumerate < 1:
            raise _Exit(2, "--enumerate needs a positive length")
        counts = {mon.name: [0, 0] for mon in mons}
        idx = 0
        for q0 in starts:
            for lam in behavior.enumerate_lassos(m, q0, args.enumerate):
                verdicts = {mon.name: norms.classify_lasso(m, mon, lam) for mon in mons}
                for k, v in verdicts.items():
                    counts[k][0 if v.compliant else 1] += 1
                out.record(
                    "lasso", index=idx, start=m.states[q0], stem=len(lam.stem), cycle=len(lam.cycle),
                    **{k: str(v).split(" ")[0] for k, v in verdicts.items()},
                )
                if args.verbose:
                    out.say(f"lasso {idx}: " + ", ".join(f"{k}={v}" for k, v in verdicts.items()))
                    _emit_lasso(out, m, lam, str(idx))
                idx += 1
        out.say(f"{idx} lassos of length <= {args.enumerate}")
        for name, (ok, bad) in counts.items():
            out.record("census", norm=name, max_len=args.enumerate, compliant=ok, violating=bad)
            out.say(f"  {name}: {ok} compliant, {bad} violating", bad == 0)
        return 0

    if args.strategy:
        profile = _read_strategy(args.strategy, m)
        source = args.strategy
    else:
        rng = random.Random(args.seed)
        profile = {
            (a, q): rng.choice(m.availability[q][a]) for q in range(m.n_states) for a in range(m.n_agents)
        }
        source = f"seed {args.seed}"
    for q0 in starts:
        try:
            lam = behavior.lasso_from_strategy(m, profile, q0)
        except IssError as exc:
            raise _Exit(1, str(exc))
        label = f"{m.states[q0]}"
        out.say(f"run from {label} under {source}:")
        out.record("run", start=label, strategy=source, stem=len(lam.stem), cycle=len(lam.cycle))
        _emit_lasso(out, m, lam, label)
        for mon in mons:
            v = norms.classify_lasso(m, mon, lam)
            out.record("verdict", start=label, norm=mon.name, outcome=v.outcome.value, position=v.position, phase=v.phase)
            out.say(f"  {mon.name}: {v}", v.compliant)

    for mon in mons:
        found = norms.exists_violation(m, mon)
        out.record("violation_search", norm=mon.name, found=found.found)
        if found:
            v = norms.classify_lasso(m, mon, found.witness)
            out.say(f"{mon.name}: violation reachable, witness ({v}):", False)
            _emit_lasso(out, m, found.witness, f"witness:{mon.name}")
        else:
            out.say(f"{mon.name}: no reachable violation", True)
    return 0


def _sanction_policy(args, low: dsl.Lowered) -> tuple[coordination.SanctionPolicy, str]:
    spec = low.sanction
    m = low.model
    try:
        if args.sv is not None or args.money is not None:
            money = args.money or (m.resources[spec.policy.money_resource] if spec else None)
            sv = args.sv if args.sv is not None else (spec.policy.sv if spec else None)
            if money is None or sv is None:
                raise _Exit(2, "sanction needs --sv and --money (or a sanction policy in the model)")
            policy = coordination.SanctionPolicy(m.resource_id(money), sv)
        elif spec:
            policy = spec.policy
        else:
            raise _Exit(2, "sanction needs --sv and --money (or a sanction policy in the model)")
    except KeyError as exc:
        raise _Exit(1, f"unknown resource {exc}")
    except InvalidPolicy as exc:
        raise _Exit(1, str(exc))
    mode = args.attribution or (spec.mode if spec else "trigger")
    return policy, mode


def _repair_policy(args, low: dsl.Lowered) -> coordination.ReparationPolicy:
    spec = low.repair.policy if low.repair else None
    vals = {
        "cv": args.cv if args.cv is not None else (spec.cv if spec else None),
        "sv": args.sv if args.sv is not None else (spec.sv if spec else None),
        "window": args.window if args.window is not None else (spec.window if spec else None),
        "repair_action": args.repair_action or (spec.repair_action if spec else None),
    }
    missing = [k for k, v in vals.items() if v is None]
    if missing:
        raise _Exit(2, "repair needs " + ", ".join(missing) + " (flags or a repair policy in the model)")
    m = low.model
    if args.money:
        money = m.resource_id(args.money) if args.money in m.resources else None
        if money is None:
            raise _Exit(1, f"unknown resource {args.money!r}")
    else:
        money = spec.money_resource if spec else (m.resource_id("money") if "money" in m.resources else 0)
    try:
        policy = coordination.ReparationPolicy(money_resource=money, **vals)
    except InvalidPolicy as exc:
        raise _Exit(1, str(exc))
    problems = coordination.check_repair_payment(m, policy)
    if problems:
        raise _Exit(1, "; ".join(problems))
    return policy


def _enforce(mode: str, args, low: dsl.Lowered, mon: norms.NormMonitor):
    m = low.model
    if mode == "regiment":
        return coordination.regiment(m, mon, lookahead=not args.no_lookahead, allow_deadlock=args.allow_deadlock)
    if mode == "sanction":
        policy, attribution = _sanction_policy(args, low)
        return coordination.sanction(m, mon, policy, attribution)
    return coordination.repair(m, mon, _repair_policy(args, low))


def _policy_norm(low: dsl.Lowered, mode: str) -> str | None:
    spec = low.sanction if mode == "sanction" else low.repair if mode == "repair" else None
    return spec.norm if spec else None


def _emit_audit(out: Output, rec: dict):
    out.record("audit", **rec)
    good = not rec["violation_possible_after"] if rec["mode"] == "regiment" else None
    out.say(f"{rec['norm']} / {rec['mode']}:", good)
    for k, v in rec.items():
        if k not in ("norm", "mode"):
            out.say(f"  {k} = {_value(v)}")


def cmd_enforce(args, out: Output) -> int:
    low, _, _ = _load(args, out)
    m = low.model
    mon = _pick_norm(low, args.norm, _policy_norm(low, args.mode))
    try:
        res = _enforce(args.mode, args, low, mon)
    except (NormUnenforceable, RegimentationDeadlock) as exc:
        out.record("error", kind=type(exc).__name__, message=str(exc))
        raise _Exit(1, f"{type(exc).__name__}: {exc}")

    if args.mode == "regiment":
        for state, joint in res.report.pruned:
            out.record("pruned", state=state, joint=joint)
        for state in res.report.deadlocked_states:
            out.record("deadlocked", state=state)
        doc = dsl.model_document(res.model, [res.monitor])
    elif args.mode == "sanction":
        for state, agent, action in res.report.charged:
            out.record("charged", state=state, agent=agent, action=action, amount=res.report.policy.sv)
        for state, joint in res.report.overcharged:
            out.record("overcharged", state=state, joint=joint)
        doc = dsl.model_document(res.model, [res.monitor])
    else:
        doc = dsl.model_document(m, [res.monitor])
    _emit_audit(out, coordination.enforcement_audit(m, mon, res, args.max_len))

    text = dsl.serialize(doc)
    if args.output:
        try:
            Path(args.output).write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            raise _Exit(2, f"cannot write {args.output}: {exc}")
        out.say(f"wrote {args.output}")
    elif out.fmt == "human":
        out.say("")
        sys.stdout.write(text)
    return 0


def _budget(text: str | None, r: int) -> tuple[int, ...]:
    if text is None:
        return (0,) * r
    try:
        vals = tuple(int(v) for v in text.strip("[]").split(",") if v.strip())
    except ValueError:
        raise _Exit(2, f"bad budget {text!r}; expected e.g. 1,0,2")
    return vals


def _levels(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise _Exit(2, f"bad sweep {text!r}; expected e.g. 0..8")


def _emit_probe(out: Output, rec: verify.ProbeRecord, **extra):
    fields = {k: getattr(rec, k) for k in ("operator", "n_states", "model_size", "budget_product", "config_bound", "configs_explored", "holds")}
    out.record("probe", **extra, **fields)
    out.say(
        f"  probe: {rec.configs_explored} configurations explored (bound {rec.config_bound}), "
        f"{rec.wall_time_s * 1000:.2f} ms"
    )


def cmd_verify(args, out: Output) -> int:
    low, _, _ = _load(args, out)
    m = low.model
    start = None
    if args.start:
        try:
            start = m.state_id(args.start)
        except KeyError:
            raise _Exit(1, f"unknown state {args.start!r}")
    if args.query is None:
        coalition = (
            [m.agent_id(a) for a in args.coalition.split(",")] if args.coalition else range(m.n_agents)
        )
        budget = _budget(args.budget, m.n_resources)
        ok = True
        for mon in _selected_norms(low, args.norm):
            try:
                res = verify.check_norm_enforceable(m, mon, coalition, budget)
            except IssError as exc:
                raise _Exit(1, str(exc))
            ok &= res.holds
            out.record("enforceable", norm=mon.name, budget=list(budget), holds=res.holds, configs=res.configs_explored)
            out.say(f"{mon.name}: coalition can{'' if res.holds else 'not'} keep the norm within {list(budget)}", res.holds)
        return 0 if ok else 1

    try:
        q = verify.parse_query(m, args.query, start)
    except QuerySyntaxError as exc:
        print(f"query error: {exc}\n  {exc.text}\n  {' ' * (exc.column - 1)}^", file=sys.stderr)
        raise _Exit(2)
    except IssError as exc:
        raise _Exit(1, str(exc))
    text = verify.format_query(m, q)

    if args.sweep:
        levels = _levels(args.sweep)
        try:
            recs = verify.budget_sweep(m, q, levels)
        except IssError as exc:
            raise _Exit(1, str(exc))
        out.say(f"budget sweep of {text}:")
        for b, rec in zip(levels, recs):
            out.say(f"  b={b}: holds={_value(rec.holds)} explored={rec.configs_explored} bound={rec.config_bound}")
            _emit_probe(out, rec, level=b)
        products = [r.budget_product for r in recs]
        if len(set(products)) > 1:
            slope = verify.fit_exponent(products, [r.configs_explored for r in recs])
            out.record("fit", x="budget_product", exponent=f"{slope:.4f}")
            out.say(f"  log-log exponent vs budget product: {slope:.3f}")
        if args.figures:
            from .plotting import scaling_figure

            path = scaling_figure(recs, "budget_product", _figdir(args.figures) / "budget_sweep.png", text)
            out.say(f"  figure: {path}")
        return 0

    try:
        res = verify.check(m, q)
    except IssError as exc:
        raise _Exit(1, str(exc))
    out.record("verify", query=text, holds=res.holds, configs=res.configs_explored)
    out.say(f"{text}: {'holds' if res.holds else 'does not hold'}", res.holds)
    for s, ok in sorted(res.starts.items()):
        out.record("start", state=m.states[s], holds=ok)
        out.say(f"  from {m.states[s]}: {_value(ok)}", verbose=True)
    if res.witness_strategy:
        out.say("  strategy:")
        for (s, rem), choice in res.witness_strategy.items():
            acts = {m.agents[a]: m.actions[x] for a, x in sorted(choice.items())}
            out.record("strategy", state=m.states[s], remaining=list(rem), **acts)
            out.say(f"    {m.states[s]} [{','.join(map(str, rem))}]: " + ", ".join(f"{a}:{x}" for a, x in acts.items()))
    if args.probe:
        _emit_probe(out, verify.complexity_probe(m, q))
    return 0 if res.holds else 1


def _figdir(path: str) -> Path:
    d = Path(path)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _Exit(2, f"cannot create {path}: {exc}")
    return d


def cmd_audit(args, out: Output) -> int:
    low, _, _ = _load(args, out)
    m = low.model
    audits = []
    for mon in _selected_norms(low, args.norm):
        found = norms.exists_violation(m, mon)
        out.record("violation_search", norm=mon.name, found=found.found)
        out.say(f"{mon.name}: violation {'reachable' if found else 'unreachable'}", not found.found)
        for mode in ("regiment", "sanction", "repair"):
            if mode != "regiment" and not _has_policy(args, low, mode):
                out.record("skipped", norm=mon.name, mode=mode, reason="no policy")
                out.say(f"{mon.name} / {mode}: skipped (no policy)")
                continue
            try:
                res = _enforce(mode, args, low, mon)
            except (NormUnenforceable, RegimentationDeadlock) as exc:
                out.record("audit_error", norm=mon.name, mode=mode, kind=type(exc).__name__, message=str(exc))
                out.say(f"{mon.name} / {mode}: {type(exc).__name__}: {exc}", False)
                continue
            rec = coordination.enforcement_audit(m, mon, res, args.max_len)
            audits.append(rec)
            _emit_audit(out, rec)
    if args.figures:
        from .plotting import census_figure

        path = census_figure(audits, _figdir(args.figures) / "census.png")
        out.say(f"figure: {path}")
    return 0


def _has_policy(args, low: dsl.Lowered, mode: str) -> bool:
    if mode == "sanction":
        return low.sanction is not None or args.sv is not None
    return low.repair is not None or None not in (args.cv, args.sv, args.window, args.repair_action)


# -- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", nargs="?", help="model file (.iss); default: bundled scenario")
    common.add_argument("--format", choices=("human", "records"), default="human")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--norm", help="norm name (default: all, or the policy's norm)")

    policy = argparse.ArgumentParser(add_help=False)
    policy.add_argument("--sv", type=int, help="sanction value")
    policy.add_argument("--money", help="money resource")
    policy.add_argument("--attribution", choices=("trigger", "collective"))
    policy.add_argument("--cv", type=int, help="compensation paid by the repair action")
    policy.add_argument("--window", "-w", type=int, help="repair window in steps")
    policy.add_argument("--repair-action")
    policy.add_argument("--allow-deadlock", action="store_true")
    policy.add_argument("--no-lookahead", action="store_true", help="prune only steps that violate at once")
    policy.add_argument("--max-len", type=int, default=4, help="lasso length for census comparisons")

    p = argparse.ArgumentParser(prog="iss", description="Norms and budgets for multi-agent models.")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a model file")

    s = sub.add_parser("simulate", parents=[common], help="run or enumerate behaviors")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--enumerate", type=int, metavar="L", help="all lassos of length <= L")
    g.add_argument("--strategy", metavar="FILE", help="lines of 'agent state action'")
    s.add_argument("--start", help="start state (default: every initial state)")

    e = sub.add_parser("enforce", parents=[common, policy], help="regiment, sanction or repair a norm")
    e.add_argument("--mode", choices=("regiment", "sanction", "repair"), required=True)
    e.add_argument("-o", "--output", help="write the transformed model here")

    v = sub.add_parser("verify", parents=[common], help="check a coalition query")
    v.add_argument("query", nargs="?", help="e.g. '<<A,B budget=[1,0,2]>> F {q3}'")
    v.add_argument("--model", "-m", dest="model_opt", help=argparse.SUPPRESS)
    v.add_argument("--start", help="evaluate from this state only")
    v.add_argument("--probe", action="store_true", help="report explored configurations")
    v.add_argument("--sweep", metavar="LO..HI", help="uniform budget levels to probe")
    v.add_argument("--coalition", help="coalition for the default norm check (default: everyone)")
    v.add_argument("--budget", help="budget for the default norm check, e.g. 1,0,2")
    v.add_argument("--figures", metavar="DIR")

    a = sub.add_parser("audit", parents=[common, policy], help="compare all enforcement modes")
    a.add_argument("--figures", metavar="DIR")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.command == "verify":
        # ``iss verify FILE QUERY`` and ``iss verify QUERY`` are both accepted
        if args.model_opt:
            args.model = args.model_opt
        elif args.model is not None and args.query is None and args.model.lstrip().startswith("<<"):
            args.model, args.query = None, args.model
    out = Output(args.format, args.verbose)
    handler = {
        "validate": cmd_validate,
        "simulate": cmd_simulate,
        "enforce": cmd_enforce,
        "verify": cmd_verify,
        "audit": cmd_audit,
    }[args.command]
    try:
        code = handler(args, out)
        sys.stdout.flush()
        return code
    except _Exit as exc:
        if exc.message:
            print(f"iss: {exc.message}", file=sys.stderr)
        return exc.code
    except BrokenPipeError:
        # reader went away (e.g. piped into head); not an error of ours
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
