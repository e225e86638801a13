"""Simulated quantum device: honest and faulty execution of circuits.

The device executes adaptive circuits (gadget corrections fed back from
ancilla measurements) and fixed sequences (corrections frozen, fresh
measurement outcomes recorded but never used).  Everything the verifier may
see crosses this module as classical data: bits, counts, hashes, seeds.

Two execution paths are provided.  The per-run path samples one trajectory
with an explicit RNG and is the reference semantics.  The batch path builds
the exact joint distribution over all measurement records once (branching at
each measurement) and then draws a multinomial sample; for fault models whose
behaviour is identical and independent across repetitions this is
distribution-equivalent to looping the per-run path and is what makes
10^5..10^7-repetition test batches affordable.  Per-gate random faults
(DEPOLARIZING) are not run-homogeneous and always take the per-run path.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import statevector as sv
from .circuit import (AdaptiveCircuit, Circuit, FixedSequence, Instruction,
                      gadget_label, is_gadget_label, resolve, require_valid,
                      serialize)

PROB_TOL = 1e-12

_PAULIS_1Q = ("X", "Y", "Z")
_PAULIS_2Q = tuple((a, b)
                   for a in ("ID", "X", "Y", "Z")
                   for b in ("ID", "X", "Y", "Z")
                   if (a, b) != ("ID", "ID"))


class FaultModelError(RuntimeError):
    """A fault model forced a physically impossible event."""


@dataclass(frozen=True)
class Ideal:
    pass


@dataclass(frozen=True)
class MagicMiscalibration:
    """Magic-state source prepares phase pi/4 + delta_theta instead of pi/4."""

    delta_theta: float


@dataclass(frozen=True)
class GadgetCoinBias:
    """Gadget-ancilla measurements report Bernoulli(1/2 + bias) outcomes,
    collapsing the state onto whatever the coin said."""

    bias: float

    def __post_init__(self):
        if abs(self.bias) > 0.5:
            raise ValueError("|bias| must be at most 0.5")


@dataclass(frozen=True)
class Depolarizing:
    """After each gate, with probability p_err, a uniformly random
    non-identity Pauli is appended on the gate's lines."""

    p_err: float

    def __post_init__(self):
        if not (0.0 <= self.p_err <= 1.0):
            raise ValueError("p_err must be a probability")


@dataclass(frozen=True)
class Liar:
    """Reports output 0 with fixed probability q, ignoring the actual state."""

    q: float

    def __post_init__(self):
        if not (0.0 <= self.q <= 1.0):
            raise ValueError("q must be a probability")


FaultModel = Union[Ideal, MagicMiscalibration, GadgetCoinBias, Depolarizing,
                   Liar]
IDEAL = Ideal()

_FAULT_NAMES = {
    Ideal: "ideal",
    MagicMiscalibration: "magic_miscalibration",
    GadgetCoinBias: "gadget_coin_bias",
    Depolarizing: "depolarizing",
    Liar: "liar",
}


def fault_to_text(fault: FaultModel) -> str:
    name = _FAULT_NAMES[type(fault)]
    if isinstance(fault, Ideal):
        return name
    value = next(iter(vars(fault).values()))
    return f"{name} {value!r}"


def parse_fault(text: str) -> FaultModel:
    """Parse a fault spec like "ideal" or "gadget_coin_bias 0.1"."""
    parts = text.split()
    if not parts:
        raise ValueError("empty fault spec")
    name, args = parts[0].lower(), parts[1:]
    table = {
        "ideal": (Ideal, 0),
        "magic_miscalibration": (MagicMiscalibration, 1),
        "gadget_coin_bias": (GadgetCoinBias, 1),
        "depolarizing": (Depolarizing, 1),
        "liar": (Liar, 1),
    }
    if name not in table:
        raise ValueError(f"unknown fault model {name!r}")
    cls, arity = table[name]
    if len(args) != arity:
        raise ValueError(f"{name} takes {arity} parameter(s), got {len(args)}")
    return cls(*(float(a) for a in args))


def is_run_homogeneous(fault: FaultModel) -> bool:
    """True when repeated runs are i.i.d. draws from one fixed distribution."""
    return not isinstance(fault, Depolarizing)


def derive_seed(master: int, *key: int) -> int:
    """Independent 64-bit child seed for a named sub-stream of `master`."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def circuit_id(circuit: Circuit) -> str:
    """SHA-256 of the canonical circuit text."""
    return hashlib.sha256(serialize(circuit).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Transcript:
    """Record of one adaptive computational run."""

    circuit_id: str
    gadget_outcomes: tuple[int, ...]
    final_output: int
    seed: int
    resolved: FixedSequence

    def to_json_dict(self) -> dict:
        return {
            "circuit_id": self.circuit_id,
            "seed": self.seed,
            "gadget_outcomes": list(self.gadget_outcomes),
            "final_output": self.final_output,
        }


@dataclass(frozen=True)
class MeasurementEvent:
    """One measurement slot of a sequence, in execution order."""

    line: int
    label: Optional[str]
    is_gadget: bool


@dataclass(frozen=True)
class FixedRunResult:
    """All measurement outcomes of one non-adaptive run, in order."""

    outcomes: tuple[int, ...]
    final_output: int


@dataclass(frozen=True)
class BatchResult:
    """Outcome-record counts for a batch of identically prepared runs."""

    events: tuple[MeasurementEvent, ...]
    counts: dict[tuple[int, ...], int]
    repetitions: int

    def index_of_label(self, label: str, line: Optional[int] = None) -> int:
        """Index of the measurement slot with this label; pass `line` to
        disambiguate should a user label collide with a reserved one."""
        for i, ev in enumerate(self.events):
            if ev.label == label and (line is None or ev.line == line):
                return i
        raise KeyError(f"no measurement labelled {label!r}")

    def marginal(self, indices: tuple[int, ...]) -> dict[tuple[int, ...], int]:
        out: dict[tuple[int, ...], int] = {}
        for record, count in self.counts.items():
            key = tuple(record[i] for i in indices)
            out[key] = out.get(key, 0) + count
        return out

    def frequency_of_one(self, index: int) -> float:
        ones = sum(c for rec, c in self.counts.items() if rec[index] == 1)
        return ones / self.repetitions


def _gadget_events(circuit: AdaptiveCircuit) -> list[Instruction]:
    return [ins for ins in circuit.instructions if ins.op == "TGADGET"]


def _plan_events(instructions, adaptive: bool) -> list[MeasurementEvent]:
    """Measurement slots of an instruction list, expanding gadgets.

    In adaptive circuits gadget measurements are exactly the TGADGET
    ancilla readouts.  In resolved sequences gadgets are already expanded,
    so the reserved m<i> labels emitted by resolve() identify them.
    """
    events = []
    gadgets = 0
    for ins in instructions:
        if ins.op == "TGADGET":
            gadgets += 1
            events.append(MeasurementEvent(ins.ancilla,
                                           gadget_label(gadgets), True))
        elif ins.op == "MEASURE":
            gadget = not adaptive and is_gadget_label(ins.label)
            events.append(MeasurementEvent(ins.targets[0], ins.label, gadget))
    return events


def _effective_probs(p_one: float, event: MeasurementEvent, is_final: bool,
                     fault: FaultModel) -> tuple[float, float, bool]:
    """(P(0), P(1), overridden) for one measurement under the fault model."""
    if isinstance(fault, GadgetCoinBias) and event.is_gadget:
        return 0.5 - fault.bias, 0.5 + fault.bias, True
    if isinstance(fault, Liar) and is_final:
        return fault.q, 1.0 - fault.q, True
    return 1.0 - p_one, p_one, False


class _Executor:
    """Shared gate/measurement mechanics for both execution paths."""

    def __init__(self, inputs, fault: FaultModel, max_lines: int):
        self.fault = fault
        shift = fault.delta_theta if isinstance(fault, MagicMiscalibration) \
            else 0.0
        self.initial = sv.init_state(inputs, magic_phase_shift=shift,
                                     max_lines=max_lines)

    def apply_unitary(self, state, ins: Instruction, rng):
        if ins.op == "ID":
            return state
        state = sv.apply_gate(state, ins)
        fault = self.fault
        if isinstance(fault, Depolarizing) and rng is not None \
                and rng.random() < fault.p_err:
            if len(ins.targets) == 1:
                pauli = _PAULIS_1Q[rng.integers(3)]
                state = sv.apply_pauli(state, ins.targets[0], pauli)
            else:
                pa, pb = _PAULIS_2Q[rng.integers(15)]
                if pa != "ID":
                    state = sv.apply_pauli(state, ins.targets[0], pa)
                if pb != "ID":
                    state = sv.apply_pauli(state, ins.targets[1], pb)
        return state

    def sample_measure(self, state, event: MeasurementEvent, is_final: bool,
                       rng) -> tuple[int, object, float]:
        """Sample one outcome; returns (outcome, collapsed state, Born p1)."""
        p_one = sv.probability_of_one(state, event.line)
        p0, p1, overridden = _effective_probs(p_one, event, is_final,
                                              self.fault)
        outcome = 1 if rng.random() < p1 else 0
        true_p = p_one if outcome else 1.0 - p_one
        if true_p < PROB_TOL:
            if overridden and not is_final:
                raise FaultModelError(
                    f"fault model forced outcome {outcome} of probability "
                    f"zero on line {event.line}")
            if overridden:
                return outcome, state, p_one  # lie about a terminal readout
            outcome = 1 - outcome  # numerical guard for honest sampling
        return outcome, sv.collapse(state, event.line, outcome), p_one


def _run_single(instructions, inputs, fault: FaultModel, seed: int,
                adaptive: bool, max_lines: int):
    """One trajectory; returns (record bits, events, gadget Born p1 list)."""
    rng = np.random.default_rng(seed)
    ex = _Executor(inputs, fault, max_lines)
    events = _plan_events(instructions, adaptive)
    if not events:
        raise ValueError("sequence has no measurements")
    final_index = len(events) - 1
    state = ex.initial
    record: list[int] = []
    gadget_probs: list[float] = []
    ev = 0
    for ins in instructions:
        if ins.op == "TGADGET":
            if not adaptive:
                raise ValueError("TGADGET in a non-adaptive sequence")
            state = ex.apply_unitary(
                state, Instruction("CX", (ins.targets[0], ins.ancilla)), rng)
            outcome, state, p_one = ex.sample_measure(
                state, events[ev], ev == final_index, rng)
            gadget_probs.append(p_one)
            record.append(outcome)
            ev += 1
            if outcome:
                state = ex.apply_unitary(state, Instruction("S", ins.targets),
                                         rng)
        elif ins.op == "MEASURE":
            outcome, state, p_one = ex.sample_measure(
                state, events[ev], ev == final_index, rng)
            if events[ev].is_gadget:
                gadget_probs.append(p_one)
            record.append(outcome)
            ev += 1
        else:
            state = ex.apply_unitary(state, ins, rng)
    return tuple(record), tuple(events), tuple(gadget_probs)


def outcome_distribution(instructions, inputs, fault: FaultModel,
                         adaptive: bool, max_lines: int = sv.DEFAULT_MAX_LINES,
                         collect_gadget_probs: bool = False):
    """Exact joint distribution over measurement records.

    Returns (events, {record: probability}) and, when requested, the Born
    P(1) of every gadget measurement in every branch as a third element.
    Only valid for run-homogeneous fault models.
    """
    if not is_run_homogeneous(fault):
        raise ValueError(f"{fault_to_text(fault)} has no fixed per-run "
                         "distribution")
    ex = _Executor(inputs, fault, max_lines)
    events = _plan_events(instructions, adaptive)
    final_index = len(events) - 1
    branches: list[tuple[object, float, tuple[int, ...]]] = \
        [(ex.initial, 1.0, ())]
    gadget_probs: list[float] = []
    ev = 0

    def branch_measure(event: MeasurementEvent, correction_target=None):
        nonlocal branches, ev
        is_final = ev == final_index
        children = []
        for state, prob, record in branches:
            p_one = sv.probability_of_one(state, event.line)
            if event.is_gadget and collect_gadget_probs:
                gadget_probs.append(p_one)
            p0, p1, overridden = _effective_probs(p_one, event, is_final,
                                                  fault)
            for outcome, p_eff in ((0, p0), (1, p1)):
                if p_eff <= 0.0:
                    continue
                true_p = p_one if outcome else 1.0 - p_one
                if true_p < PROB_TOL:
                    if not overridden:
                        continue
                    if not is_final:
                        raise FaultModelError(
                            f"fault model forces outcome {outcome} of "
                            f"probability zero on line {event.line}")
                    child_state = state  # terminal lie, state unused
                else:
                    child_state = sv.collapse(state, event.line, outcome)
                if outcome and correction_target is not None:
                    child_state = sv.apply_gate(
                        child_state, Instruction("S", (correction_target,)))
                children.append((child_state, prob * p_eff,
                                 record + (outcome,)))
        branches = children
        ev += 1

    for ins in instructions:
        if ins.op == "TGADGET":
            if not adaptive:
                raise ValueError("TGADGET in a non-adaptive sequence")
            cx = Instruction("CX", (ins.targets[0], ins.ancilla))
            branches = [(sv.apply_gate(state, cx), prob, record)
                        for state, prob, record in branches]
            branch_measure(events[ev], correction_target=ins.targets[0])
        elif ins.op == "MEASURE":
            branch_measure(events[ev])
        elif ins.op != "ID":
            branches = [(sv.apply_gate(state, ins), prob, record)
                        for state, prob, record in branches]

    dist = {record: prob for _, prob, record in branches}
    total = sum(dist.values())
    if abs(total - 1.0) > 1e-9:
        raise AssertionError(f"branch probabilities sum to {total}")
    if collect_gadget_probs:
        return tuple(events), dist, tuple(gadget_probs)
    return tuple(events), dist


def _sample_distribution(events, dist, repetitions: int,
                         seed: int) -> BatchResult:
    rng = np.random.default_rng(seed)
    records = list(dist.keys())
    probs = np.array([dist[r] for r in records], dtype=float)
    draws = rng.multinomial(repetitions, probs / probs.sum())
    counts = {rec: int(c) for rec, c in zip(records, draws) if c}
    return BatchResult(events=events, counts=counts, repetitions=repetitions)


class SimulatedDevice:
    """In-process prover.  The constructor fixes the hardware's fault model;
    the verifier only ever sees classical run records."""

    def __init__(self, fault: FaultModel = IDEAL,
                 max_lines: int = sv.DEFAULT_MAX_LINES):
        self.fault = fault
        self.max_lines = max_lines

    def run_adaptive(self, circuit: AdaptiveCircuit, seed: int) -> Transcript:
        """One adaptive run: gadget corrections applied immediately after
        their ancilla measurements, everything recorded."""
        require_valid(circuit)
        record, events, _ = _run_single(
            circuit.instructions, circuit.inputs, self.fault, seed,
            adaptive=True, max_lines=self.max_lines)
        gadget_bits = tuple(bit for bit, ev in zip(record, events)
                            if ev.is_gadget)
        return Transcript(
            circuit_id=circuit_id(circuit),
            gadget_outcomes=gadget_bits,
            final_output=record[-1],
            seed=seed,
            resolved=resolve(circuit, gadget_bits),
        )

    def run_fixed(self, seq: FixedSequence, seed: int) -> FixedRunResult:
        """One non-adaptive run of a frozen sequence; corrections are applied
        positionally regardless of the fresh measurement outcomes."""
        record, _, _ = _run_single(
            seq.instructions, seq.inputs, self.fault, seed,
            adaptive=False, max_lines=self.max_lines)
        return FixedRunResult(outcomes=record[:-1], final_output=record[-1])

    def run_fixed_batch(self, seq: FixedSequence, repetitions: int,
                        seed: int) -> BatchResult:
        if repetitions <= 0:
            raise ValueError("repetitions must be positive")
        if is_run_homogeneous(self.fault):
            events, dist = outcome_distribution(
                seq.instructions, seq.inputs, self.fault, adaptive=False,
                max_lines=self.max_lines)
            return _sample_distribution(events, dist, repetitions, seed)
        return self._batch_by_loop(seq.instructions, seq.inputs, repetitions,
                                   seed, False)

    def run_adaptive_batch(self, circuit: AdaptiveCircuit, repetitions: int,
                           seed: int) -> BatchResult:
        require_valid(circuit)
        if is_run_homogeneous(self.fault):
            events, dist = outcome_distribution(
                circuit.instructions, circuit.inputs, self.fault,
                adaptive=True, max_lines=self.max_lines)
            return _sample_distribution(events, dist, repetitions, seed)
        return self._batch_by_loop(circuit.instructions, circuit.inputs,
                                   repetitions, seed, True)

    def _batch_by_loop(self, instructions, inputs, repetitions: int,
                       seed: int, adaptive: bool) -> BatchResult:
        counts: dict[tuple[int, ...], int] = {}
        events = None
        for rep in range(repetitions):
            record, events, _ = _run_single(
                instructions, inputs, self.fault,
                derive_seed(seed, rep), adaptive, self.max_lines)
            counts[record] = counts.get(record, 0) + 1
        return BatchResult(events=tuple(events), counts=counts,
                           repetitions=repetitions)


def run_adaptive(circuit: AdaptiveCircuit, seed: int,
                 fault: FaultModel = IDEAL) -> Transcript:
    return SimulatedDevice(fault).run_adaptive(circuit, seed)


def run_fixed(seq: FixedSequence, seed: int,
              fault: FaultModel = IDEAL) -> FixedRunResult:
    return SimulatedDevice(fault).run_fixed(seq, seed)


def gadget_born_probabilities(circuit: AdaptiveCircuit,
                              fault: FaultModel = IDEAL) -> tuple[float, ...]:
    """Born P(1) of every gadget measurement in every branch of the adaptive
    execution tree (computed, not sampled)."""
    require_valid(circuit)
    _, _, probs = outcome_distribution(
        circuit.instructions, circuit.inputs, fault, adaptive=True,
        collect_gadget_probs=True)
    return probs


def final_output_probability(seq: FixedSequence,
                             fault: FaultModel = IDEAL) -> float:
    """P(final output = 0) of the fixed sequence with all intermediate
    measurements simulated in place (the device's actual marginal)."""
    events, dist = outcome_distribution(seq.instructions, seq.inputs, fault,
                                        adaptive=False)
    return sum(p for record, p in dist.items() if record[-1] == 0)


def final_output_probability_unitary_only(seq: FixedSequence) -> float:
    """P(final output = 0) with intermediate measurements omitted entirely."""
    state = sv.init_state(seq.inputs)
    for ins in seq.instructions:
        if ins.op not in ("MEASURE", "ID"):
            state = sv.apply_gate(state, ins)
    return 1.0 - sv.probability_of_one(state, seq.output_line)
