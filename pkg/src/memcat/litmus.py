"""Litmus test frontend.

Parses the small assembly-like litmus format, statically evaluates
register contents (addresses and stored values must be compile-time
constants), builds per-thread event graphs with intra-instruction and
register dataflow edges, and projects everything down to the memory
events and relations the enumerator works on.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from typing import Optional, Union

from .relation import (
    BranchEvent,
    Event,
    FenceEvent,
    MemRead,
    MemWrite,
    RegRead,
    RegWrite,
    Relation,
)


ARCH_FENCES = {
    "power": {"sync", "lwsync", "eieio", "isync"},
    "arm": {"dmb", "dsb", "dmb.st", "dsb.st", "isb"},
    "tso": {"mfence"},
    "sc": set(),
    "generic": set(),
}

ALL_FENCE_KINDS = (
    "sync", "lwsync", "eieio", "isync",
    "dmb", "dsb", "dmb.st", "dsb.st", "isb",
    "mfence",
)

# control fences: the branch;fence;access idiom strengthens ctrl
_CTRL_FENCES = ("isync", "isb")


class LitmusError(Exception):
    def __init__(self, msg: str, line: Optional[int] = None):
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)


# ------------------------------------------------------------- instructions


@dataclass(frozen=True)
class MovConst:
    dst: str
    val: int


@dataclass(frozen=True)
class Load:
    dst: str
    addr: str


@dataclass(frozen=True)
class Store:
    addr: str
    src: str


@dataclass(frozen=True)
class Xor:
    dst: str
    a: str
    b: str


@dataclass(frozen=True)
class Add:
    dst: str
    a: str
    b: Union[str, int]


@dataclass(frozen=True)
class Cmp:
    reg: str
    val: int


@dataclass(frozen=True)
class Branch:
    kind: str
    label: str


@dataclass(frozen=True)
class LabelDef:
    name: str


@dataclass(frozen=True)
class Fence:
    kind: str


Instr = Union[MovConst, Load, Store, Xor, Add, Cmp, Branch, LabelDef, Fence]


# ------------------------------------------------------------ final condition


@dataclass(frozen=True)
class RegEq:
    thread: str
    reg: str
    value: int


@dataclass(frozen=True)
class LocEq:
    loc: str
    value: int


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Final:
    quant: str
    cond: object


@dataclass
class LitmusTest:
    name: str
    arch: str
    init_locs: dict
    init_regs: dict  # (thread | None, reg) -> ("int", n) | ("loc", name)
    threads: dict  # name -> [Instr], in declaration order
    final: Final
    expect: dict


# ------------------------------------------------------------------- parsing

_RE_INIT = re.compile(r"^(?:(\w+)\s*:\s*)?([A-Za-z_]\w*)\s*=\s*(?:&([A-Za-z_]\w*)|(-?\d+))$")
_RE_MOV = re.compile(r"^mov\s+([A-Za-z_]\w*)\s*,\s*#(-?\d+)$")
_RE_LD = re.compile(r"^ld\s+([A-Za-z_]\w*)\s*,\s*\[([A-Za-z_]\w*)\]$")
_RE_ST = re.compile(r"^st\s+\[([A-Za-z_]\w*)\]\s*,\s*([A-Za-z_]\w*)$")
_RE_XOR = re.compile(r"^xor\s+([A-Za-z_]\w*)\s*,\s*([A-Za-z_]\w*)\s*,\s*([A-Za-z_]\w*)$")
_RE_ADD = re.compile(
    r"^add\s+([A-Za-z_]\w*)\s*,\s*([A-Za-z_]\w*)\s*,\s*(?:#(-?\d+)|([A-Za-z_]\w*))$"
)
_RE_CMP = re.compile(r"^cmp\s+([A-Za-z_]\w*)\s*,\s*#(-?\d+)$")
_RE_BR = re.compile(r"^(bne|beq)\s+(\w+)$")
_RE_LABEL = re.compile(r"^(\w+):$")
_RE_FENCE = re.compile(r"^([a-z]+(?:\.[a-z]+)?)$")
_RE_EXPECT = re.compile(r"^([\w.+-]+)\s*=\s*(allowed|forbidden)$")
_RE_ATOM = re.compile(r"(?:(\w+):)?([A-Za-z_]\w*)=(-?\d+)")


def _is_reg(name: str) -> bool:
    return name.startswith("r")


def _parse_instr(text: str, arch: str, line: int) -> Instr:
    text = text.strip()
    if m := _RE_MOV.match(text):
        return MovConst(m.group(1), int(m.group(2)))
    if m := _RE_LD.match(text):
        return Load(m.group(1), m.group(2))
    if m := _RE_ST.match(text):
        return Store(m.group(1), m.group(2))
    if m := _RE_XOR.match(text):
        return Xor(m.group(1), m.group(2), m.group(3))
    if m := _RE_ADD.match(text):
        b = int(m.group(3)) if m.group(3) is not None else m.group(4)
        return Add(m.group(1), m.group(2), b)
    if m := _RE_CMP.match(text):
        return Cmp(m.group(1), int(m.group(2)))
    if m := _RE_BR.match(text):
        return Branch(m.group(1), m.group(2))
    if m := _RE_LABEL.match(text):
        return LabelDef(m.group(1))
    if m := _RE_FENCE.match(text):
        kind = m.group(1)
        if kind in ALL_FENCE_KINDS:
            if kind not in ARCH_FENCES[arch]:
                raise LitmusError(f"fence {kind} not available on {arch}", line)
            return Fence(kind)
    raise LitmusError(f"cannot parse instruction {text!r}", line)


def _tokenize_cond(text: str, line: int):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif text.startswith("/\\", i):
            tokens.append("/\\")
            i += 2
        elif text.startswith("\\/", i):
            tokens.append("\\/")
            i += 2
        elif ch in "()":
            tokens.append(ch)
            i += 1
        else:
            m = _RE_ATOM.match(text, i)
            if not m:
                raise LitmusError(f"bad final condition near {text[i:]!r}", line)
            thread, name, value = m.group(1), m.group(2), int(m.group(3))
            if thread is not None:
                tokens.append(RegEq(thread, name, value))
            elif _is_reg(name):
                raise LitmusError(
                    f"register {name} in final must be thread-qualified", line
                )
            else:
                tokens.append(LocEq(name, value))
            i = m.end()
    return tokens


def _parse_cond(tokens: list, line: int):
    pos = 0

    def atom():
        nonlocal pos
        if pos >= len(tokens):
            raise LitmusError("final condition ends early", line)
        tok = tokens[pos]
        if tok == "(":
            pos += 1
            node = disj()
            if pos >= len(tokens) or tokens[pos] != ")":
                raise LitmusError("unbalanced parentheses in final", line)
            pos += 1
            return node
        if isinstance(tok, (RegEq, LocEq)):
            pos += 1
            return tok
        raise LitmusError(f"unexpected token {tok!r} in final", line)

    def conj():
        nonlocal pos
        items = [atom()]
        while pos < len(tokens) and tokens[pos] == "/\\":
            pos += 1
            items.append(atom())
        return items[0] if len(items) == 1 else And(tuple(items))

    def disj():
        nonlocal pos
        items = [conj()]
        while pos < len(tokens) and tokens[pos] == "\\/":
            pos += 1
            items.append(conj())
        return items[0] if len(items) == 1 else Or(tuple(items))

    node = disj()
    if pos != len(tokens):
        raise LitmusError("trailing tokens in final condition", line)
    return node


def parse_litmus(text: str) -> LitmusTest:
    # '#' starts a comment unless it introduces an immediate like #1 or #-1
    raw = [
        (no, re.sub(r"#(?![-\d]).*$", "", ln).rstrip())
        for no, ln in enumerate(text.splitlines(), 1)
    ]
    lines = [(no, ln) for no, ln in raw if ln.strip()]
    if not lines:
        raise LitmusError("empty litmus source")

    no, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise LitmusError("header must be '<name> <arch>'", no)
    name, arch = parts[0], parts[1].lower()
    if arch not in ARCH_FENCES:
        raise LitmusError(f"unknown architecture {arch!r}", no)

    init_locs: dict = {}
    init_regs: dict = {}
    threads: dict = {}
    final: Optional[Final] = None
    expect: dict = {}

    def collect_block(i):
        # lines[i] holds the '{'; returns ([(line_no, content)], next_index)
        no, ln = lines[i]
        after = ln.split("{", 1)[1]
        acc = []
        if "}" in after:
            inner = after.split("}", 1)[0]
            if inner.strip():
                acc.append((no, inner))
            return acc, i + 1
        if after.strip():
            acc.append((no, after))
        j = i + 1
        while j < len(lines):
            no2, ln2 = lines[j]
            if "}" in ln2:
                inner = ln2.split("}", 1)[0]
                if inner.strip():
                    acc.append((no2, inner))
                return acc, j + 1
            acc.append((no2, ln2))
            j += 1
        raise LitmusError("unterminated block", no)

    i = 1
    while i < len(lines):
        no, ln = lines[i]
        stripped = ln.strip()
        if stripped.startswith("init"):
            if "{" not in ln:
                raise LitmusError("init needs a brace block", no)
            block, i = collect_block(i)
            for bno, content in block:
                for entry in content.split(";"):
                    entry = entry.strip()
                    if not entry:
                        continue
                    m = _RE_INIT.match(entry)
                    if not m:
                        raise LitmusError(f"bad init entry {entry!r}", bno)
                    thread, lhs, loc, num = m.groups()
                    if loc is not None:
                        if not _is_reg(lhs):
                            raise LitmusError(
                                f"{lhs} holds an address but is not a register", bno
                            )
                        if _is_reg(loc):
                            raise LitmusError(
                                f"location names must not start with 'r': {loc}", bno
                            )
                        init_regs[(thread, lhs)] = ("loc", loc)
                    elif _is_reg(lhs):
                        init_regs[(thread, lhs)] = ("int", int(num))
                    else:
                        if thread is not None:
                            raise LitmusError(
                                f"location {lhs} cannot be thread-qualified", bno
                            )
                        init_locs[lhs] = int(num)
        elif stripped.startswith("thread"):
            m = re.match(r"^thread\s+(\w+)\s*\{", stripped)
            if not m:
                raise LitmusError("bad thread header", no)
            tname = m.group(1)
            if tname in threads:
                raise LitmusError(f"duplicate thread {tname}", no)
            block, i = collect_block(i)
            instrs = []
            for bno, content in block:
                parts = content.split(";") if ";" in content else [content]
                for part in parts:
                    part = part.strip()
                    if part:
                        instrs.append(_parse_instr(part, arch, bno))
            for k, ins in enumerate(instrs):
                if isinstance(ins, Branch):
                    nxt = instrs[k + 1] if k + 1 < len(instrs) else None
                    if not (isinstance(nxt, LabelDef) and nxt.name == ins.label):
                        raise LitmusError(
                            f"branch target {ins.label} must label the next instruction",
                            no,
                        )
            threads[tname] = instrs
        elif stripped.startswith("expect"):
            block, i = collect_block(i)
            for bno, content in block:
                for entry in content.split(";"):
                    entry = entry.strip()
                    if not entry:
                        continue
                    m = _RE_EXPECT.match(entry)
                    if not m:
                        raise LitmusError(f"bad expect entry {entry!r}", bno)
                    expect[m.group(1)] = m.group(2)
        elif stripped.startswith("final"):
            m = re.match(r"^final\s+(exists|forall|observed)\s*\((.*)\)\s*$", stripped)
            if not m:
                raise LitmusError("final must be 'final <quant> ( ... )'", no)
            final = Final(m.group(1), _parse_cond(_tokenize_cond(m.group(2), no), no))
            i += 1
        else:
            raise LitmusError(f"unexpected line {stripped!r}", no)

    if final is None:
        raise LitmusError("missing final condition")
    if not threads:
        raise LitmusError("no threads declared")
    return LitmusTest(name, arch, init_locs, init_regs, threads, final, expect)


# ---------------------------------------------------------------- projection


@dataclass
class ProjectedTest:
    """Memory events of a test plus every statically known relation."""

    name: str
    arch: str
    events: tuple
    po: Relation
    deps: dict
    fences: dict
    final: Final
    expect: dict
    names: dict
    locations: tuple
    threads: tuple
    reg_sources: dict  # (thread, reg) -> ("event", eid) | ("const", n)
    init_ids: tuple

    @property
    def n(self) -> int:
        return len(self.events)

    def id_of(self, name: str) -> int:
        for eid, nm in self.names.items():
            if nm == name:
                return eid
        raise KeyError(name)


def _event_names(count: int):
    letters = string.ascii_lowercase
    for k in range(count):
        if k < len(letters):
            yield letters[k]
        else:
            yield letters[k % 26] + str(k // 26)


class _ThreadSim:
    """Static per-thread evaluation producing the micro-event graph."""

    def __init__(self, tname, instrs, regstate):
        self.tname = tname
        self.regs = regstate
        self.micro = []  # (action, instr_idx)
        self.iico = []
        self.rfreg = []
        self.last_write = {}
        self.mem_of_instr = {}
        self.loads = []  # (instr_idx, dst_reg, mem_micro_idx)
        self.reg_last = {}  # reg -> ("micro", idx) | ("const", n) | ("unknown",)
        for reg, val in regstate.items():
            if val[0] == "int":
                self.reg_last[reg] = ("const", val[1])
        for idx, ins in enumerate(instrs):
            self._step(idx, ins)

    def _emit(self, action, instr_idx):
        self.micro.append((action, instr_idx))
        return len(self.micro) - 1

    def _read_reg(self, reg, port, instr_idx):
        idx = self._emit(RegRead(reg, port), instr_idx)
        if reg in self.last_write:
            self.rfreg.append((self.last_write[reg], idx))
        return idx

    def _write_reg(self, reg, instr_idx):
        idx = self._emit(RegWrite(reg), instr_idx)
        self.last_write[reg] = idx
        return idx

    def _loc_of(self, reg, what):
        val = self.regs.get(reg, ("unknown",))
        if val[0] != "loc":
            raise LitmusError(
                f"{self.tname}: {what} register {reg} must hold a location address"
            )
        return val[1]

    def _step(self, idx, ins):
        if isinstance(ins, MovConst):
            self._write_reg(ins.dst, idx)
            self.regs[ins.dst] = ("int", ins.val)
            self.reg_last[ins.dst] = ("const", ins.val)
        elif isinstance(ins, Load):
            loc = self._loc_of(ins.addr, "address")
            a = self._read_reg(ins.addr, "addr", idx)
            m = self._emit(MemRead(loc), idx)
            w = self._write_reg(ins.dst, idx)
            self.iico += [(a, m), (m, w)]
            self.mem_of_instr[idx] = m
            self.regs[ins.dst] = ("unknown",)
            self.loads.append((idx, ins.dst, m))
            self.reg_last[ins.dst] = ("load", m)
        elif isinstance(ins, Store):
            loc = self._loc_of(ins.addr, "address")
            val = self.regs.get(ins.src, ("unknown",))
            if val[0] != "int":
                raise LitmusError(
                    f"{self.tname}: stored value in {ins.src} must be a static integer"
                )
            a = self._read_reg(ins.addr, "addr", idx)
            v = self._read_reg(ins.src, "value", idx)
            m = self._emit(MemWrite(loc, val[1]), idx)
            self.iico += [(a, m), (v, m)]
            self.mem_of_instr[idx] = m
        elif isinstance(ins, Xor):
            r1 = self._read_reg(ins.a, "operand", idx)
            r2 = self._read_reg(ins.b, "operand", idx)
            w = self._write_reg(ins.dst, idx)
            self.iico += [(r1, w), (r2, w)]
            va, vb = self.regs.get(ins.a, ("unknown",)), self.regs.get(ins.b, ("unknown",))
            if ins.a == ins.b:
                out = ("int", 0)  # x^x=0 even when x is runtime-dependent
            elif va[0] == "int" and vb[0] == "int":
                out = ("int", va[1] ^ vb[1])
            else:
                out = ("unknown",)
            self.regs[ins.dst] = out
            self.reg_last[ins.dst] = ("const", out[1]) if out[0] == "int" else ("unknown",)
        elif isinstance(ins, Add):
            r1 = self._read_reg(ins.a, "operand", idx)
            if isinstance(ins.b, str):
                r2 = self._read_reg(ins.b, "operand", idx)
                vb = self.regs.get(ins.b, ("unknown",))
                srcs = [r1, r2]
            else:
                vb = ("int", ins.b)
                srcs = [r1]
            w = self._write_reg(ins.dst, idx)
            self.iico += [(s, w) for s in srcs]
            va = self.regs.get(ins.a, ("unknown",))
            out = self._add_vals(va, vb)
            self.regs[ins.dst] = out
            self.reg_last[ins.dst] = ("const", out[1]) if out[0] == "int" else ("unknown",)
        elif isinstance(ins, Cmp):
            r = self._read_reg(ins.reg, "operand", idx)
            w = self._write_reg("cr0", idx)
            self.iico.append((r, w))
            self.regs["cr0"] = ("unknown",)
        elif isinstance(ins, Branch):
            r = self._read_reg("cr0", "flag", idx)
            b = self._emit(BranchEvent(), idx)
            self.iico.append((r, b))
        elif isinstance(ins, LabelDef):
            pass
        elif isinstance(ins, Fence):
            self._emit(FenceEvent(ins.kind), idx)
        else:  # pragma: no cover
            raise LitmusError(f"unhandled instruction {ins!r}")

    def _add_vals(self, va, vb):
        vals = (va, vb)
        if all(v[0] == "int" for v in vals):
            return ("int", va[1] + vb[1])
        if any(v[0] == "loc" for v in vals):
            loc = next(v for v in vals if v[0] == "loc")
            other = vb if loc is va else va
            if other[0] == "int" and other[1] == 0:
                return loc
            raise LitmusError(
                f"{self.tname}: address arithmetic beyond +0 is not supported"
            )
        return ("unknown",)

    def reach_from(self, start):
        # forward closure over iico and register dataflow
        succs = {}
        for s, d in self.iico + self.rfreg:
            succs.setdefault(s, []).append(d)
        seen, work = set(), [start]
        while work:
            cur = work.pop()
            for nxt in succs.get(cur, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    work.append(nxt)
        return seen


def project(test: LitmusTest) -> ProjectedTest:
    sims = {}
    for tname, instrs in test.threads.items():
        regstate = {}
        for (qual, reg), val in test.init_regs.items():
            if qual is None or qual == tname:
                regstate[reg] = val
        sims[tname] = _ThreadSim(tname, instrs, regstate)

    locations = sorted(
        {
            act.loc
            for sim in sims.values()
            for act, _ in sim.micro
            if isinstance(act, (MemRead, MemWrite))
        }
    )
    if not locations:
        raise LitmusError("test accesses no memory")

    events = []
    names = {}
    init_ids = []
    for k, loc in enumerate(locations):
        eid = len(events)
        events.append(Event(eid, "init", k, MemWrite(loc, test.init_locs.get(loc, 0))))
        names[eid] = "i" + loc
        init_ids.append(eid)

    # program memory events in (thread, po) order, with their micro index
    micro_to_eid = {}
    program = []
    for tname, sim in sims.items():
        for midx, (act, instr_idx) in enumerate(sim.micro):
            if isinstance(act, (MemRead, MemWrite)):
                eid = len(events)
                events.append(Event(eid, tname, instr_idx, act, origin=instr_idx))
                micro_to_eid[(tname, midx)] = eid
                program.append(eid)
    for label, eid in zip(_event_names(len(program)), program):
        names[eid] = label

    n = len(events)
    po_pairs = []
    for tname in sims:
        ids = [e.id for e in events if e.thread == tname]
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                po_pairs.append((ids[a], ids[b]))
    po = Relation.from_pairs(n, po_pairs)

    fences = {}
    for kind in ALL_FENCE_KINDS:
        pairs = []
        for tname, sim in sims.items():
            fence_instrs = [
                instr for act, instr in sim.micro
                if isinstance(act, FenceEvent) and act.kind == kind
            ]
            if not fence_instrs:
                continue
            mems = [
                (instr, micro_to_eid[(tname, midx)])
                for midx, (act, instr) in enumerate(sim.micro)
                if isinstance(act, (MemRead, MemWrite))
            ]
            for fi in fence_instrs:
                for i1, e1 in mems:
                    for i2, e2 in mems:
                        if i1 < fi < i2:
                            pairs.append((e1, e2))
        fences[kind] = Relation.from_pairs(n, pairs)

    addr_pairs, data_pairs, ctrl_pairs = [], [], []
    ctrlk_pairs = {k: [] for k in _CTRL_FENCES}
    for tname, sim in sims.items():
        mem_reads = [
            midx
            for midx, (act, _) in enumerate(sim.micro)
            if isinstance(act, MemRead)
        ]
        mems = [
            (instr, midx)
            for midx, (act, instr) in enumerate(sim.micro)
            if isinstance(act, (MemRead, MemWrite))
        ]
        fences_at = [
            (instr, act.kind)
            for act, instr in sim.micro
            if isinstance(act, FenceEvent)
        ]
        for rm in mem_reads:
            src = micro_to_eid[(tname, rm)]
            reach = sim.reach_from(rm)
            branch_instrs = set()
            for idx in reach:
                act, instr = sim.micro[idx]
                if isinstance(act, RegRead) and instr in sim.mem_of_instr:
                    tgt_micro = sim.mem_of_instr[instr]
                    tgt = micro_to_eid[(tname, tgt_micro)]
                    tgt_act = sim.micro[tgt_micro][0]
                    if act.port == "addr":
                        addr_pairs.append((src, tgt))
                    elif act.port == "value" and isinstance(tgt_act, MemWrite):
                        data_pairs.append((src, tgt))
                elif isinstance(act, BranchEvent):
                    branch_instrs.add(instr)
            for bi in branch_instrs:
                for mi, midx in mems:
                    if mi > bi:
                        ctrl_pairs.append((src, micro_to_eid[(tname, midx)]))
                for fi, fkind in fences_at:
                    if fi > bi and fkind in ctrlk_pairs:
                        for mi, midx in mems:
                            if mi > fi:
                                ctrlk_pairs[fkind].append(
                                    (src, micro_to_eid[(tname, midx)])
                                )

    deps = {
        "addr": Relation.from_pairs(n, addr_pairs),
        "data": Relation.from_pairs(n, data_pairs),
        "ctrl": Relation.from_pairs(n, ctrl_pairs),
    }
    for k in _CTRL_FENCES:
        deps["ctrl+" + k] = Relation.from_pairs(n, ctrlk_pairs[k])
    deps["ctrl+cfence"] = deps["ctrl+isync"] | deps["ctrl+isb"]

    reg_sources = {}
    for tname, sim in sims.items():
        for reg, last in sim.reg_last.items():
            if last[0] == "load":
                reg_sources[(tname, reg)] = ("event", micro_to_eid[(tname, last[1])])
            elif last[0] == "const":
                reg_sources[(tname, reg)] = ("const", last[1])
            else:
                reg_sources[(tname, reg)] = ("unknown",)

    projected = ProjectedTest(
        name=test.name,
        arch=test.arch,
        events=tuple(events),
        po=po,
        deps=deps,
        fences=fences,
        final=test.final,
        expect=test.expect,
        names=names,
        locations=tuple(locations),
        threads=tuple(sims),
        reg_sources=reg_sources,
        init_ids=tuple(init_ids),
    )
    _validate_final(projected)
    return projected


def _validate_final(t: ProjectedTest):
    def walk(node):
        if isinstance(node, (And, Or)):
            for item in node.items:
                walk(item)
        elif isinstance(node, RegEq):
            if node.thread not in t.threads:
                raise LitmusError(f"final mentions unknown thread {node.thread}")
            src = t.reg_sources.get((node.thread, node.reg))
            if src is None or src[0] == "unknown":
                raise LitmusError(
                    f"final mentions {node.thread}:{node.reg} which has no "
                    "statically known source"
                )
        elif isinstance(node, LocEq):
            if node.loc not in t.locations:
                raise LitmusError(f"final mentions unaccessed location {node.loc}")

    walk(t.final.cond)
