"""Circuit representation, text format, validation, and T-gadget compilation.

Circuits are lists of instructions over `n_lines` qubit lines, each line
carrying a 1-qubit product input.  Non-Clifford T gates are compiled into
TGADGET macro instructions (CX onto a magic-state ancilla, ancilla
measurement, outcome-conditioned S correction).  An adaptive circuit plus a
recorded outcome vector resolves into a fixed, fully non-adaptive sequence.

Text format (UTF-8, line oriented, '#' starts a comment):

    qubits <n>
    input <line> <ZERO|ONE|MAGIC|GENERAL theta phi>     # default ZERO
    <H|S|SDG|X|Y|Z|ID|T> <line>
    <CX|CZ|SWAP> <a> <b>
    TGADGET <target> <ancilla>
    MEASURE <line> <label>

The final instruction of a runnable circuit must be `MEASURE <line> out`.
Measurement labels of the form m1, m2, ... are reserved for gadget ancilla
measurements emitted by :func:`resolve`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Union

ZERO = "ZERO"
ONE = "ONE"
MAGIC = "MAGIC"
GENERAL = "GENERAL"
INPUT_KINDS = frozenset({ZERO, ONE, MAGIC, GENERAL})

ONE_LINE_OPS = frozenset({"H", "S", "SDG", "X", "Y", "Z", "ID", "T"})
TWO_LINE_OPS = frozenset({"CX", "CZ", "SWAP"})
ALL_OPS = ONE_LINE_OPS | TWO_LINE_OPS | {"MEASURE", "TGADGET"}

OUTPUT_LABEL = "out"
_GADGET_LABEL_RE = re.compile(r"^m[0-9]+$")


def gadget_label(index: int) -> str:
    """Reserved measurement label for the index-th gadget (1-based)."""
    return f"m{index}"


def is_gadget_label(label: Optional[str]) -> bool:
    return label is not None and _GADGET_LABEL_RE.match(label) is not None


class CircuitParseError(ValueError):
    """Malformed circuit text, with 1-based line/column of the offence."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.reason = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class InputState:
    """1-qubit product input for one line.

    MAGIC is the equatorial state with relative phase pi/4 on |1>; it is
    numerically identical to GENERAL(pi/2, pi/4) but kept as its own kind so
    the prover can model magic-state preparation separately.
    """

    kind: str = ZERO
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.kind == GENERAL:
            if not (0.0 <= self.theta <= math.pi):
                raise ValueError(f"theta {self.theta} outside [0, pi]")
            if not (0.0 <= self.phi < 2.0 * math.pi):
                raise ValueError(f"phi {self.phi} outside [0, 2*pi)")
        elif self.theta or self.phi:
            raise ValueError(f"{self.kind} input takes no angles")

    def bloch(self) -> tuple[float, float, float]:
        """(<X>, <Y>, <Z>) of this 1-qubit state."""
        if self.kind == ZERO:
            return (0.0, 0.0, 1.0)
        if self.kind == ONE:
            return (0.0, 0.0, -1.0)
        if self.kind == MAGIC:
            r = math.sqrt(0.5)
            return (r, r, 0.0)
        st = math.sin(self.theta)
        return (st * math.cos(self.phi), st * math.sin(self.phi),
                math.cos(self.theta))


@dataclass(frozen=True)
class Instruction:
    """One circuit instruction.

    `ancilla` is set only for TGADGET, `label` only for MEASURE.  ID is the
    explicit no-op marker used for frozen S^0 gadget corrections, so resolved
    sequences are positionally identical across outcome vectors.
    """

    op: str
    targets: tuple[int, ...]
    ancilla: Optional[int] = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.op not in ALL_OPS:
            raise ValueError(f"unknown op {self.op!r}")
        if self.op in ONE_LINE_OPS and len(self.targets) != 1:
            raise ValueError(f"{self.op} takes exactly one target")
        if self.op in TWO_LINE_OPS:
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ValueError(f"{self.op} takes two distinct targets")
        if self.op == "MEASURE":
            if len(self.targets) != 1:
                raise ValueError("MEASURE takes exactly one target")
            if not self.label:
                raise ValueError("MEASURE requires a label")
        if self.op == "TGADGET":
            if len(self.targets) != 1 or self.ancilla is None:
                raise ValueError("TGADGET takes one target and one ancilla")
            if self.ancilla == self.targets[0]:
                raise ValueError("TGADGET target and ancilla must differ")
        if self.op != "TGADGET" and self.ancilla is not None:
            raise ValueError(f"{self.op} takes no ancilla")
        if self.op != "MEASURE" and self.label is not None:
            raise ValueError(f"{self.op} takes no label")

    @property
    def lines(self) -> tuple[int, ...]:
        """All lines touched by this instruction."""
        if self.op == "TGADGET":
            return (self.targets[0], self.ancilla)
        return self.targets

    @property
    def is_unitary(self) -> bool:
        return self.op not in ("MEASURE", "TGADGET")


@dataclass(frozen=True)
class AdaptiveCircuit:
    """Circuit that may contain TGADGET (and, pre-compilation, raw T) ops."""

    n_lines: int
    inputs: tuple[InputState, ...]
    instructions: tuple[Instruction, ...]
    output_line: int

    def __post_init__(self):
        if self.n_lines <= 0:
            raise ValueError("n_lines must be positive")
        if len(self.inputs) != self.n_lines:
            raise ValueError("one input state per line required")

    @property
    def gadget_count(self) -> int:
        return sum(1 for ins in self.instructions if ins.op == "TGADGET")

    @property
    def t_count(self) -> int:
        return sum(1 for ins in self.instructions if ins.op == "T")


@dataclass(frozen=True)
class FixedSequence:
    """Fully resolved non-adaptive sequence: Clifford gates + measurements.

    Gadget corrections are frozen to `frozen_outcomes` (S for 1, ID for 0),
    one entry per gadget of the source circuit, in gadget order.
    """

    n_lines: int
    inputs: tuple[InputState, ...]
    instructions: tuple[Instruction, ...]
    output_line: int
    frozen_outcomes: tuple[int, ...]

    def __post_init__(self):
        for ins in self.instructions:
            if ins.op in ("T", "TGADGET"):
                raise ValueError(f"fixed sequence may not contain {ins.op}")


Circuit = Union[AdaptiveCircuit, FixedSequence]


@dataclass(frozen=True)
class Violation:
    """One structural-invariant violation found by :func:`validate`."""

    code: str
    index: Optional[int]  # instruction index, None for circuit-level issues
    message: str


MEASURED_LINE_REUSED = "MEASURED_LINE_REUSED"
ANCILLA_NOT_MAGIC = "ANCILLA_NOT_MAGIC"
OUTPUT_NOT_FINAL_MEASUREMENT = "OUTPUT_NOT_FINAL_MEASUREMENT"
LINE_OUT_OF_RANGE = "LINE_OUT_OF_RANGE"


def validate(circuit: Circuit) -> list[Violation]:
    """Scan a circuit for structural violations; empty list means valid.

    Checks, in one pass: line indices in range, no line used after being
    measured (gadget ancillas count as measured), every gadget ancilla
    prepared in MAGIC, and the designated output line measured exactly once
    as the final instruction.
    """
    out: list[Violation] = []
    measured: set[int] = set()
    for idx, ins in enumerate(circuit.instructions):
        for line in ins.lines:
            if not (0 <= line < circuit.n_lines):
                out.append(Violation(
                    LINE_OUT_OF_RANGE, idx,
                    f"line {line} outside 0..{circuit.n_lines - 1}"))
        for line in ins.lines:
            if line in measured:
                out.append(Violation(
                    MEASURED_LINE_REUSED, idx,
                    f"line {line} used after its measurement"))
        if ins.op == "MEASURE":
            measured.add(ins.targets[0])
        elif ins.op == "TGADGET":
            anc = ins.ancilla
            if 0 <= anc < circuit.n_lines and circuit.inputs[anc].kind != MAGIC:
                out.append(Violation(
                    ANCILLA_NOT_MAGIC, idx,
                    f"gadget ancilla {anc} has input "
                    f"{circuit.inputs[anc].kind}, expected MAGIC"))
            measured.add(anc)

    last = circuit.instructions[-1] if circuit.instructions else None
    if (last is None or last.op != "MEASURE"
            or last.targets[0] != circuit.output_line
            or last.label != OUTPUT_LABEL):
        out.append(Violation(
            OUTPUT_NOT_FINAL_MEASUREMENT, None,
            f"final instruction must be MEASURE {circuit.output_line} "
            f"{OUTPUT_LABEL}"))
    else:
        for ins in circuit.instructions[:-1]:
            if ins.op == "MEASURE" and ins.targets[0] == circuit.output_line:
                out.append(Violation(
                    OUTPUT_NOT_FINAL_MEASUREMENT, None,
                    "output line measured before the final instruction"))
                break
    return out


def require_valid(circuit: Circuit, partial: bool = False) -> None:
    """Raise ValueError listing all violations if the circuit is invalid.

    With partial=True the output-measurement placement rule is waived; this
    admits prefix sequences whose terminal measurements are test probes
    rather than the designated output.
    """
    violations = validate(circuit)
    if partial:
        violations = [v for v in violations
                      if v.code != OUTPUT_NOT_FINAL_MEASUREMENT]
    if violations:
        lines = "; ".join(v.message for v in violations)
        raise ValueError(f"invalid circuit: {lines}")


def gadgetize(circuit: AdaptiveCircuit) -> AdaptiveCircuit:
    """Replace every raw T gate by a TGADGET onto a fresh MAGIC ancilla.

    Ancilla lines are appended after the existing lines, in T-gate order, so
    original line indices are stable.  T-free circuits are returned
    unchanged.
    """
    t_count = circuit.t_count
    if t_count == 0:
        return circuit
    if any(ins.op == "TGADGET" for ins in circuit.instructions):
        raise ValueError("circuit mixes raw T gates with existing TGADGETs")
    next_ancilla = circuit.n_lines
    new_instructions = []
    for ins in circuit.instructions:
        if ins.op == "T":
            new_instructions.append(Instruction(
                "TGADGET", ins.targets, ancilla=next_ancilla))
            next_ancilla += 1
        else:
            new_instructions.append(ins)
    return AdaptiveCircuit(
        n_lines=circuit.n_lines + t_count,
        inputs=circuit.inputs + (InputState(MAGIC),) * t_count,
        instructions=tuple(new_instructions),
        output_line=circuit.output_line,
    )


def expand_gadget(ins: Instruction, index: int,
                  outcome: Optional[int]) -> tuple[Instruction, ...]:
    """Expand one TGADGET into CX, labelled ancilla MEASURE, and, when an
    outcome is given, the frozen S/ID correction on the target."""
    target, ancilla = ins.targets[0], ins.ancilla
    parts = [
        Instruction("CX", (target, ancilla)),
        Instruction("MEASURE", (ancilla,), label=gadget_label(index)),
    ]
    if outcome is not None:
        parts.append(Instruction("S" if outcome else "ID", (target,)))
    return tuple(parts)


def resolve(circuit: AdaptiveCircuit,
            outcomes: Iterable[int]) -> FixedSequence:
    """Freeze an adaptive circuit to the fixed sequence for given outcomes.

    The i-th gadget becomes CX(target, ancilla), MEASURE(ancilla, m<i>),
    then S on the target if outcomes[i] else an explicit ID marker, keeping
    instruction positions identical for every outcome vector.
    """
    outcomes = tuple(int(b) for b in outcomes)
    if any(b not in (0, 1) for b in outcomes):
        raise ValueError("outcomes must be bits")
    if len(outcomes) != circuit.gadget_count:
        raise ValueError(
            f"got {len(outcomes)} outcomes for {circuit.gadget_count} gadgets")
    if circuit.t_count:
        raise ValueError("gadgetize the circuit before resolving")
    new_instructions: list[Instruction] = []
    g = 0
    for ins in circuit.instructions:
        if ins.op == "TGADGET":
            new_instructions.extend(expand_gadget(ins, g + 1, outcomes[g]))
            g += 1
        else:
            new_instructions.append(ins)
    return FixedSequence(
        n_lines=circuit.n_lines,
        inputs=circuit.inputs,
        instructions=tuple(new_instructions),
        output_line=circuit.output_line,
        frozen_outcomes=outcomes,
    )


def _format_input(line: int, state: InputState) -> str:
    if state.kind == GENERAL:
        return f"input {line} GENERAL {state.theta!r} {state.phi!r}"
    return f"input {line} {state.kind}"


def serialize(circuit: Circuit) -> str:
    """Canonical text form; ZERO inputs are omitted as the default."""
    lines = [f"qubits {circuit.n_lines}"]
    for i, state in enumerate(circuit.inputs):
        if state.kind != ZERO:
            lines.append(_format_input(i, state))
    for ins in circuit.instructions:
        if ins.op == "MEASURE":
            lines.append(f"MEASURE {ins.targets[0]} {ins.label}")
        elif ins.op == "TGADGET":
            lines.append(f"TGADGET {ins.targets[0]} {ins.ancilla}")
        else:
            lines.append(f"{ins.op} {' '.join(str(t) for t in ins.targets)}")
    return "\n".join(lines) + "\n"


class _LineParser:
    """Tokenised view of one source line with positioned errors."""

    def __init__(self, line_no: int, text: str):
        self.line_no = line_no
        self.tokens = [(m.group(0), m.start() + 1)
                       for m in re.finditer(r"\S+", text)]
        self.pos = 0

    def error(self, message: str, column: int = 1) -> CircuitParseError:
        return CircuitParseError(message, self.line_no, column)

    def take(self, what: str) -> tuple[str, int]:
        if self.pos >= len(self.tokens):
            col = self.tokens[-1][1] + len(self.tokens[-1][0]) if self.tokens else 1
            raise self.error(f"expected {what}", col)
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def take_int(self, what: str) -> tuple[int, int]:
        tok, col = self.take(what)
        try:
            return int(tok, 10), col
        except ValueError:
            raise self.error(f"expected {what}, got {tok!r}", col) from None

    def take_float(self, what: str) -> tuple[float, int]:
        tok, col = self.take(what)
        try:
            return float(tok), col
        except ValueError:
            raise self.error(f"expected {what}, got {tok!r}", col) from None

    def finish(self) -> None:
        if self.pos < len(self.tokens):
            tok, col = self.tokens[self.pos]
            raise self.error(f"unexpected trailing token {tok!r}", col)


def parse_circuit(text: str) -> AdaptiveCircuit:
    """Parse circuit text into an AdaptiveCircuit.

    Raises CircuitParseError (with 1-based line/column) on syntax errors,
    references to undeclared lines, arity mismatches, non-MAGIC gadget
    ancillas, and use of a line after its measurement.  Placement of the
    final output measurement is left to :func:`validate` so that partial
    circuits (e.g. headers only) still round-trip through serialize.
    """
    n_lines: Optional[int] = None
    inputs: list[InputState] = []
    instructions: list[Instruction] = []
    measured: set[int] = set()
    declared_inputs: set[int] = set()

    def check_line(idx: int, col: int, lp: _LineParser) -> None:
        if not (0 <= idx < n_lines):
            raise lp.error(f"line {idx} not declared (qubits {n_lines})", col)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        lp = _LineParser(line_no, body)
        word, col0 = lp.take("a directive or instruction")

        if n_lines is None:
            if word != "qubits":
                raise lp.error("circuit must start with 'qubits <n>'", col0)
            count, col = lp.take_int("line count")
            if count <= 0:
                raise lp.error("line count must be positive", col)
            lp.finish()
            n_lines = count
            inputs = [InputState(ZERO)] * n_lines
            continue

        if word == "qubits":
            raise lp.error("duplicate 'qubits' directive", col0)

        if word == "input":
            if instructions:
                raise lp.error("input declarations must precede instructions",
                               col0)
            idx, col = lp.take_int("line index")
            check_line(idx, col, lp)
            if idx in declared_inputs:
                raise lp.error(f"duplicate input declaration for line {idx}",
                               col)
            kind, kcol = lp.take("input kind")
            if kind not in INPUT_KINDS:
                raise lp.error(f"unknown input kind {kind!r}", kcol)
            if kind == GENERAL:
                theta, tcol = lp.take_float("theta")
                phi, pcol = lp.take_float("phi")
                try:
                    state = InputState(GENERAL, theta, phi)
                except ValueError as exc:
                    raise lp.error(str(exc), tcol) from None
            else:
                state = InputState(kind)
            lp.finish()
            declared_inputs.add(idx)
            inputs[idx] = state
            continue

        if word not in ALL_OPS:
            raise lp.error(f"unknown instruction {word!r}", col0)

        if word in ONE_LINE_OPS:
            idx, col = lp.take_int("target line")
            check_line(idx, col, lp)
            if idx in measured:
                raise lp.error(f"line {idx} already measured", col)
            lp.finish()
            instructions.append(Instruction(word, (idx,)))
        elif word in TWO_LINE_OPS:
            a, acol = lp.take_int("first line")
            check_line(a, acol, lp)
            b, bcol = lp.take_int("second line")
            check_line(b, bcol, lp)
            if a == b:
                raise lp.error(f"{word} lines must be distinct", bcol)
            for idx, col in ((a, acol), (b, bcol)):
                if idx in measured:
                    raise lp.error(f"line {idx} already measured", col)
            lp.finish()
            instructions.append(Instruction(word, (a, b)))
        elif word == "TGADGET":
            target, tcol = lp.take_int("target line")
            check_line(target, tcol, lp)
            ancilla, acol = lp.take_int("ancilla line")
            check_line(ancilla, acol, lp)
            if target == ancilla:
                raise lp.error("gadget target and ancilla must differ", acol)
            for idx, col in ((target, tcol), (ancilla, acol)):
                if idx in measured:
                    raise lp.error(f"line {idx} already measured", col)
            if inputs[ancilla].kind != MAGIC:
                raise lp.error(
                    f"gadget ancilla {ancilla} has input "
                    f"{inputs[ancilla].kind}, expected MAGIC", acol)
            lp.finish()
            instructions.append(Instruction("TGADGET", (target,),
                                            ancilla=ancilla))
            measured.add(ancilla)
        else:  # MEASURE
            idx, col = lp.take_int("target line")
            check_line(idx, col, lp)
            if idx in measured:
                raise lp.error(f"line {idx} already measured", col)
            label, _ = lp.take("outcome label")
            lp.finish()
            instructions.append(Instruction("MEASURE", (idx,), label=label))
            measured.add(idx)

    if n_lines is None:
        raise CircuitParseError("empty circuit text", 1, 1)

    last = instructions[-1] if instructions else None
    if last is not None and last.op == "MEASURE" and last.label == OUTPUT_LABEL:
        output_line = last.targets[0]
    else:
        output_line = n_lines - 1
    return AdaptiveCircuit(
        n_lines=n_lines,
        inputs=tuple(inputs),
        instructions=tuple(instructions),
        output_line=output_line,
    )


def structurally_equal(a: Circuit, b: Circuit) -> bool:
    """Field-wise equality ignoring the AdaptiveCircuit/FixedSequence split."""
    return (a.n_lines == b.n_lines and a.inputs == b.inputs
            and a.instructions == b.instructions
            and a.output_line == b.output_line)
