"""Shared test utilities: seeded circuit generators and dense-matrix oracles."""

from __future__ import annotations

import math
import random
from pathlib import Path

import numpy as np

from cliffcert.circuit import (GENERAL, MAGIC, ONE, ZERO, AdaptiveCircuit,
                               FixedSequence, InputState, Instruction)
from cliffcert.pauli import PauliOperator
from cliffcert.statevector import GATES_1Q, GATES_2Q

REPO_ROOT = Path(__file__).resolve().parent.parent
CIRCUITS = REPO_ROOT / "circuits"
CONFIGS = REPO_ROOT / "configs"

CLIFFORD_1Q = ("H", "S", "SDG", "X", "Y", "Z")
CLIFFORD_2Q = ("CX", "CZ", "SWAP")


def random_input(rng: random.Random) -> InputState:
    kind = rng.choice((ZERO, ONE, MAGIC, GENERAL))
    if kind != GENERAL:
        return InputState(kind)
    theta = math.acos(rng.uniform(-1.0, 1.0))
    phi = rng.uniform(0.0, 2.0 * math.pi * (1.0 - 1e-12))
    return InputState(GENERAL, theta, phi)


def random_inputs(rng: random.Random, n: int) -> tuple[InputState, ...]:
    return tuple(random_input(rng) for _ in range(n))


def random_fixed_sequence(rng: random.Random, n: int, depth: int,
                          intermediate: int = 0) -> FixedSequence:
    """Random non-adaptive Clifford sequence ending in MEASURE <line> out.

    Up to `intermediate` lines are measured mid-sequence and discarded, so
    the measured-line no-reuse invariant always holds.
    """
    alive = list(range(n))
    instructions: list[Instruction] = []
    budget = intermediate
    for _ in range(depth):
        if len(alive) >= 2 and rng.random() < 0.4:
            a, b = rng.sample(alive, 2)
            instructions.append(Instruction(rng.choice(CLIFFORD_2Q), (a, b)))
        else:
            instructions.append(Instruction(rng.choice(CLIFFORD_1Q),
                                            (rng.choice(alive),)))
        if budget and len(alive) > 1 and rng.random() < 0.15:
            line = rng.choice(alive)
            alive.remove(line)
            instructions.append(Instruction("MEASURE", (line,),
                                            label=f"x{line}"))
            budget -= 1
    output = rng.choice(alive)
    instructions.append(Instruction("MEASURE", (output,), label="out"))
    return FixedSequence(n, random_inputs(rng, n), tuple(instructions),
                         output, ())


def random_t_circuit(rng: random.Random, n: int, depth: int,
                     n_t: int) -> AdaptiveCircuit:
    """Random Clifford circuit with `n_t` raw T gates, ready to gadgetize."""
    instructions: list[Instruction] = []
    t_slots = sorted(rng.sample(range(depth), min(n_t, depth)))
    for d in range(depth):
        if t_slots and d == t_slots[0]:
            t_slots.pop(0)
            instructions.append(Instruction("T", (rng.randrange(n),)))
        elif n >= 2 and rng.random() < 0.4:
            a, b = rng.sample(range(n), 2)
            instructions.append(Instruction(rng.choice(CLIFFORD_2Q), (a, b)))
        else:
            instructions.append(Instruction(rng.choice(CLIFFORD_1Q),
                                            (rng.randrange(n),)))
    output = rng.randrange(n)
    instructions.append(Instruction("MEASURE", (output,), label="out"))
    return AdaptiveCircuit(n, random_inputs(rng, n), tuple(instructions),
                           output)


def random_pauli(rng: random.Random, n: int) -> PauliOperator:
    return PauliOperator(n, rng.getrandbits(n), rng.getrandbits(n),
                         rng.choice((1, -1)))


_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": GATES_1Q["X"],
    "Y": GATES_1Q["Y"],
    "Z": GATES_1Q["Z"],
}


def pauli_matrix(p: PauliOperator) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a signed Pauli (line 0 = leftmost factor)."""
    out = np.array([[p.sign]], dtype=complex)
    for line in range(p.n):
        xb, zb = p.bit(line)
        ch = "I" if not (xb or zb) else ("X" if not zb else
                                         ("Z" if not xb else "Y"))
        out = np.kron(out, _SINGLE[ch])
    return out


def gate_matrix(ins: Instruction, n: int) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a unitary instruction on n lines."""
    if ins.op in GATES_1Q:
        mats = [np.eye(2, dtype=complex)] * n
        mats[ins.targets[0]] = GATES_1Q[ins.op]
        out = np.array([[1.0]], dtype=complex)
        for m in mats:
            out = np.kron(out, m)
        return out
    # embed a 4x4 gate acting on (a, b) into n lines
    a, b = ins.targets
    g = GATES_2Q[ins.op]
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - i)) & 1 for i in range(n)]
        sub = (bits[a] << 1) | bits[b]
        for row_sub in range(4):
            amp = g[row_sub, sub]
            if amp == 0:
                continue
            new_bits = list(bits)
            new_bits[a] = (row_sub >> 1) & 1
            new_bits[b] = row_sub & 1
            row = 0
            for bit in new_bits:
                row = (row << 1) | bit
            out[row, col] += amp
    return out
