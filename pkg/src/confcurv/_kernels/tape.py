"""Compile expression trees into flat evaluation tapes.

A tape is a register machine: slots 0..n_consts-1 hold literals,
slots n_consts..n_consts+n_vars-1 hold the point coordinates, and each
instruction writes the next slot.  Hash-consed expression nodes map to
unique slots, so common subexpressions across a batch of expressions are
evaluated once.
"""

from __future__ import annotations

import numpy as np

from .. import expr as ex

# opcodes
ADD, MUL, DIV, POWI, EXP, LOG, SIN, COS, SQRT = range(9)

_FUNC_OPS = {"exp": EXP, "log": LOG, "sin": SIN, "cos": COS, "sqrt": SQRT}


class Tape:
    """Flat instruction program evaluating a batch of expressions."""

    __slots__ = ("n_vars", "consts", "ops", "n_slots", "outputs")

    def __init__(self, n_vars, consts, ops, n_slots, outputs):
        self.n_vars = n_vars
        self.consts = consts          # float64 (n_consts,)
        self.ops = ops                # int64 (n_instr, 3): opcode, a, b
        self.n_slots = n_slots
        self.outputs = outputs        # int64 (n_out,) slot per expression


def compile_exprs(exprs, n_vars: int) -> Tape:
    consts: list[float] = []
    const_slot: dict[float, int] = {}
    ops: list[tuple[int, int, int]] = []
    memo: dict[ex.Expr, int] = {}

    def const_index(v: float) -> int:
        key = v if v == v else float("nan")  # NaNs never appear; keep keys hashable
        idx = const_slot.get(key)
        if idx is None:
            idx = const_slot[key] = len(consts)
            consts.append(v)
        return idx

    n_header = [0]  # patched once const count is known

    def emit(e: ex.Expr) -> int:
        slot = memo.get(e)
        if slot is not None:
            return slot
        if e.kind == "const":
            slot = const_index(e.payload)
        elif e.kind == "var":
            slot = -(e.payload)  # placeholder, fixed below
        else:
            if e.kind in ("add", "mul"):
                opcode = ADD if e.kind == "add" else MUL
                acc = emit(e.args[0])
                for child in e.args[1:]:
                    rhs = emit(child)
                    ops.append((opcode, acc, rhs))
                    acc = _instr_slot(len(ops) - 1)
                memo[e] = acc
                return acc
            if e.kind == "div":
                a, b = emit(e.args[0]), emit(e.args[1])
                ops.append((DIV, a, b))
            elif e.kind == "pow":
                a = emit(e.args[0])
                ops.append((POWI, a, e.payload))
            elif e.kind == "func":
                a = emit(e.args[0])
                ops.append((_FUNC_OPS[e.payload], a, 0))
            else:
                raise AssertionError(e.kind)
            slot = _instr_slot(len(ops) - 1)
        memo[e] = slot
        return slot

    # slot layout: [consts | vars | instruction results]; during emission we
    # encode vars as negative and instruction results via a large offset so
    # the final renumbering is a pure arithmetic fix-up.
    _OFFSET = 1 << 40

    def _instr_slot(i: int) -> int:
        return _OFFSET + i

    out_slots = [emit(e) for e in exprs]

    n_consts = len(consts)

    def fix(slot: int) -> int:
        if slot >= _OFFSET:
            return n_consts + n_vars + (slot - _OFFSET)
        if slot < 0:
            return n_consts + (-slot) - 1
        return slot

    fixed_ops = np.zeros((len(ops), 3), dtype=np.int64)
    for i, (opcode, a, b) in enumerate(ops):
        fixed_ops[i, 0] = opcode
        fixed_ops[i, 1] = fix(a)
        fixed_ops[i, 2] = b if opcode == POWI else fix(b)

    return Tape(
        n_vars=n_vars,
        consts=np.asarray(consts, dtype=np.float64),
        ops=fixed_ops,
        n_slots=n_consts + n_vars + len(ops),
        outputs=np.asarray([fix(s) for s in out_slots], dtype=np.int64),
    )
