"""Simulated single-qubit device and (interleaved) randomized benchmarking.

The device implements S with a Z over-rotation, ``S(theta) = exp(-i theta Z) S``,
and both generators are followed by depolarizing noise. Group elements are
compiled into their canonical generator words, so an element with a longer
word accumulates more noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channels import (
    DensityOperator,
    MeasurementEffect,
    Superoperator,
    agf,
    compose,
    depolarizing_channel,
    unitary_channel,
    vec,
)
from .clifford import H_GATE, S_GATE, TARGET, GroupTable, clifford_group, compose_ids
from .smc import RBParams, fidelity_from_p

LENGTH_LADDER = (1, 2, 4, 8, 16, 32, 64)
DEFAULT_DEPOLARIZING = 0.005

_Z = np.diag([1.0, -1.0])


def overrotation(theta: float) -> np.ndarray:
    """exp(-i theta Z)."""
    return np.diag(np.exp(-1j * theta * np.diag(_Z)))


@dataclass(frozen=True, eq=False)
class DeviceModel:
    theta: float
    depolarizing_strength: float
    noisy_S: Superoperator
    noisy_H: Superoperator
    rho: DensityOperator
    effect: MeasurementEffect

    @classmethod
    def overrotated(cls, theta: float, depolarizing_strength: float = DEFAULT_DEPOLARIZING,
                    rho: DensityOperator | None = None,
                    effect: MeasurementEffect | None = None) -> DeviceModel:
        ground = np.diag([1.0, 0.0])
        dep = depolarizing_channel(depolarizing_strength)
        return cls(
            theta=float(theta),
            depolarizing_strength=float(depolarizing_strength),
            noisy_S=compose(dep, unitary_channel(overrotation(theta) @ S_GATE)),
            noisy_H=compose(dep, unitary_channel(H_GATE)),
            rho=rho if rho is not None else DensityOperator(ground),
            effect=effect if effect is not None else MeasurementEffect(ground),
        )

    @property
    def generators(self) -> tuple:
        return (self.noisy_S, self.noisy_H)

    @property
    def target(self) -> Superoperator:
        """Noisy implementation of the target gate (interleaved after each element)."""
        return self.generators[TARGET]

    @cached_property
    def _compiled(self) -> dict:
        return {}

    def element_superops(self, table: GroupTable) -> np.ndarray:
        """Noisy implementation of every group element, shape (|G|, d^2, d^2)."""
        cache = self._compiled
        key = id(table)
        if key not in cache:
            d2 = self.noisy_S.matrix.shape[0]
            gens = [g.matrix for g in self.generators]
            out = np.empty((len(table), d2, d2), dtype=complex)
            for el in table.elements:
                M = np.eye(d2, dtype=complex)
                for g in el.word:
                    M = gens[g] @ M
                out[el.id] = M
            out.setflags(write=False)
            cache[key] = (table, out)
        return cache[key][1]

    def discrepancy(self, table: GroupTable, element_id: int) -> Superoperator:
        """Noise channel of one element, Lambda_U = U~ (U^dagger .): ideal inverse, then noisy word."""
        U = table.elements[element_id].unitary
        return Superoperator(self.element_superops(table)[element_id]
                             @ unitary_channel(U.conj().T).matrix)

    def target_discrepancy(self) -> Superoperator:
        return compose(self.target, unitary_channel(S_GATE.conj().T))


@dataclass(frozen=True)
class RBSequence:
    length: int
    element_ids: tuple
    interleaved: bool
    inversion_id: int


@dataclass(frozen=True)
class ShotRecord:
    sequence: RBSequence
    outcome: int
    true_probability: float
    rng_stream: str = ""
    rng_counter: int = 0


def ideal_composite(table: GroupTable, element_ids, interleaved: bool) -> int:
    """Id of the ideal product of the sequence body (T after each element if interleaved)."""
    t = table.index_of(S_GATE)
    ids = []
    for i in element_ids:
        ids.append(int(i))
        if interleaved:
            ids.append(t)
    return compose_ids(table, ids)


def sequence_from_ids(table: GroupTable, element_ids, interleaved: bool) -> RBSequence:
    element_ids = tuple(int(i) for i in element_ids)
    if not element_ids:
        raise ValueError("sequence length must be >= 1")
    inv = int(table.inverse[ideal_composite(table, element_ids, interleaved)])
    return RBSequence(len(element_ids), element_ids, interleaved, inv)


def sample_sequence(table: GroupTable, m: int, interleaved: bool,
                    rng: np.random.Generator) -> RBSequence:
    """Draw m elements uniformly from the group and append the inverting element."""
    if m < 1:
        raise ValueError("sequence length must be >= 1")
    ids = rng.integers(0, len(table), size=m)
    return sequence_from_ids(table, ids, interleaved)


def survival_probability(device: DeviceModel, seq: RBSequence,
                         table: GroupTable | None = None) -> float:
    """Exact Tr(E Lambda_seq[rho]) for one sequence on the noisy device."""
    table = table or clifford_group()
    ops = device.element_superops(table)
    T = device.target.matrix
    v = vec(device.rho.matrix)
    for i in seq.element_ids:
        v = ops[i] @ v
        if seq.interleaved:
            v = T @ v
    v = ops[seq.inversion_id] @ v
    prob = float(np.real(vec(device.effect.matrix.T) @ v))
    return min(max(prob, 0.0), 1.0)


def run_shot(device: DeviceModel, seq: RBSequence, rng: np.random.Generator,
             table: GroupTable | None = None, stream: str = "", counter: int = 0) -> ShotRecord:
    prob = survival_probability(device, seq, table)
    outcome = int(rng.random() < prob)
    return ShotRecord(seq, outcome, prob, stream, counter)


def reference_channel(device: DeviceModel, table: GroupTable | None = None) -> Superoperator:
    """Uniform average of the element discrepancy channels."""
    table = table or clifford_group()
    d2 = device.noisy_S.matrix.shape[0]
    acc = np.zeros((d2, d2), dtype=complex)
    for el in table.elements:
        acc += device.discrepancy(table, el.id).matrix
    return Superoperator(acc / len(table))


def true_rb_params(device: DeviceModel, table: GroupTable | None = None,
                   interleaved: bool = True) -> RBParams:
    """Exact (p, A, B) of the device: ground truth for tests and figures only."""
    table = table or clifford_group()
    ref = reference_channel(device, table)
    d = ref.d
    channel = compose(device.target_discrepancy(), ref) if interleaved else ref
    F = agf(channel)
    p = (d * F - 1) / (d - 1)
    E = device.effect
    mixed = np.eye(d) / d
    A = E.expectation(ref(device.rho.matrix - mixed))
    B = E.expectation(ref(mixed))
    return RBParams(p=float(np.clip(p, 0, 1)), A=float(A), B=float(B))


def true_objective(device: DeviceModel, table: GroupTable | None = None) -> float:
    """F(theta) = AGF(Lambda_T Lambda_ref)."""
    return float(fidelity_from_p(true_rb_params(device, table, True).p))


def target_agf(device: DeviceModel) -> float:
    """AGF of the target gate's own discrepancy channel."""
    return agf(device.target_discrepancy())


def exact_average_survival(device: DeviceModel, m: int, interleaved: bool,
                           table: GroupTable | None = None) -> float:
    """Survival averaged over all |G|^m sequences of length m, computed exactly.

    Tracks one accumulated state vector per ideal composite element, so the
    cost is O(m |G|^2) instead of |G|^m.
    """
    table = table or clifford_group()
    n = len(table)
    ops = device.element_superops(table)
    t = table.index_of(S_GATE)
    T = device.target.matrix
    states = np.zeros((n, ops.shape[1]), dtype=complex)
    states[table.identity] = vec(device.rho.matrix)
    for _ in range(m):
        new = np.zeros_like(states)
        for c in range(n):
            if not np.any(states[c]):
                continue
            for u in range(n):
                step = ops[u] @ states[c]
                nc = int(table.product[u, c])
                if interleaved:
                    step = T @ step
                    nc = int(table.product[t, nc])
                new[nc] += step / n
        states = new
    e = vec(device.effect.matrix.T)
    total = sum(e @ (ops[int(table.inverse[c])] @ states[c]) for c in range(n))
    return float(np.real(total))


def write_shot_log(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seq_length", "interleaved", "outcome", "true_probability",
                         "rng_stream", "rng_counter"])
        for r in records:
            writer.writerow([r.sequence.length, int(r.sequence.interleaved), r.outcome,
                             repr(r.true_probability), r.rng_stream, r.rng_counter])


@dataclass
class LengthSchedule:
    """Round-robin over a ladder of sequence lengths."""

    ladder: tuple = LENGTH_LADDER
    position: int = field(default=0)

    def next(self, ensemble=None) -> int:
        m = self.ladder[self.position % len(self.ladder)]
        self.position += 1
        return m
