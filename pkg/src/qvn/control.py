"""The control unit: classical instruction schedules driving composition,
injection, and readout against a memory unit, plus the qubit-controlled
unknown-gate primitive.

Schedule text format, one instruction per line:

    compose a=<addr> b=<addr> strategy=<name> dest=<addr>
    inject target=<addr> bits=<bitstring>
    readout target=<addr> obs=<pauli string | custom rows=<d> data=<...>>
    restore addr=<addr> copies=<int>
    sampletail target=<addr> tail=<int>
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gates, tailed, uqt
from .errors import (
    EstimationError,
    OutOfCopiesError,
    ParseError,
    ValidationError,
)
from .kernel import (
    DEFAULT_TOL,
    DensityOperator,
    KrausChannel,
    Observable,
    PureState,
    RngStream,
    UnitaryOp,
    partial_trace_matrix,
)
from .memory import MemoryUnit, _tokenize, format_complex_data, parse_complex_data
from .tailed import InjectionSpec, ReadoutSpec, RunRecord
from .uqt import ByproductStrategy


@dataclass(frozen=True)
class Compose:
    addr1: int
    addr2: int
    strategy: ByproductStrategy
    dest: int


@dataclass(frozen=True)
class Inject:
    target: int
    bits: str = ""


@dataclass(frozen=True, eq=False)
class Readout:
    target: int
    observable: Observable
    label: str = "custom"


@dataclass(frozen=True)
class Restore:
    addr: int
    copies: int


@dataclass(frozen=True)
class SampleTail:
    target: int
    tail: int


@dataclass(frozen=True)
class Schedule:
    instructions: tuple
    shots: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if self.shots < 1:
            raise ValidationError("schedule needs shots >= 1")
        dests = [i.dest for i in self.instructions if isinstance(i, Compose)]
        if len(dests) != len(set(dests)):
            raise ValidationError("compose destinations must be unique per schedule")
        if sum(1 for i in self.instructions if isinstance(i, Readout)) > 1:
            raise ValidationError("at most one readout per shot path")


@dataclass(frozen=True)
class ExecutionResult:
    estimate: float | None
    standard_error: float | None
    shots: int
    n_p0: int
    n_p1: int
    records: tuple[RunRecord, ...]
    copies_after: dict
    audit_consistent: bool


class _ShotState:
    """Working registers of one shot: live states fetched from memory."""

    def __init__(self, mem: MemoryUnit, rng: RngStream):
        self.mem = mem
        self.rng = rng
        self.states: dict[int, PureState] = {}
        self.programs: dict[int, uqt.StoredProgram] = {}
        self.branch = None
        self.injected_tails = 0
        self.bells: list[int] = []
        self.value = None

    def load(self, address) -> PureState:
        if address not in self.states:
            prog = self.mem.fetch_consume(address)
            self.programs[address] = prog
            self.states[address] = tailed.program_state(prog)
        return self.states[address]


def _run_instruction(ins, shot: _ShotState, mem: MemoryUnit):
    if isinstance(ins, Compose):
        p1 = mem.fetch_consume(ins.addr1)
        p2 = mem.fetch_consume(ins.addr2)
        result, shots_used = uqt.compose(p1, p2, ins.strategy, shot.rng)
        shot.bells.append(shots_used)
        if ins.dest in mem.slots:
            mem.append_copy(ins.dest, result)
        else:
            mem.store_copies([result], description=result.description, address=ins.dest)
        return
    if isinstance(ins, Inject):
        state = shot.load(ins.target)
        n = len(state.subsystem_dims) // 2
        spec = InjectionSpec(tuple(range(n)), ins.bits or "1" * n)
        branch, _, post = tailed.inject(state, spec, shot.rng, num_ebits=n)
        shot.states[ins.target] = post
        shot.branch = branch
        shot.injected_tails = n
        return
    if isinstance(ins, Readout):
        state = shot.load(ins.target)
        n = len(state.subsystem_dims) // 2
        spec = ReadoutSpec(ins.observable, tuple(range(n)))
        vals, probs = tailed._observable_distribution(state, spec)
        if probs.sum() <= 0:
            raise EstimationError("readout distribution vanished")
        k = shot.rng.choice(probs)
        shot.value = float(vals[k].real)
        return
    if isinstance(ins, Restore):
        mem.restore(ins.addr, ins.copies)
        return
    if isinstance(ins, SampleTail):
        state = shot.load(ins.target)
        n = len(state.subsystem_dims) // 2
        bit, post = tailed.sample_tail_z(state, n + ins.tail, shot.rng)
        shot.states[ins.target] = post
        shot.bells.append(bit)
        return
    raise ValidationError(f"unknown instruction {ins!r}")


def execute(mem: MemoryUnit, sched: Schedule) -> ExecutionResult:
    """Run the schedule once per shot, mutating memory, and aggregate.

    Readout samples are combined exactly as in `tailed.run_algorithm`: the
    branch that saw the desired input estimates tr(Oρ_f) directly, the
    complement branch is inverted through tr(O) − (2^n − 1)·mean.
    """
    records = []
    grouped = {"P0": [], "P1": [], "none": []}
    n_tails = 0
    trace_of_o = None
    for shot_idx in range(sched.shots):
        shot = _ShotState(mem, RngStream(sched.seed, stream_id=shot_idx))
        for idx, ins in enumerate(sched.instructions):
            try:
                _run_instruction(ins, shot, mem)
            except OutOfCopiesError as exc:
                raise OutOfCopiesError(
                    exc.address, f"instruction {idx} ({type(ins).__name__}): {exc}"
                ) from exc
            if isinstance(ins, Readout):
                trace_of_o = ins.observable.trace
        branch = "none" if shot.branch is None else f"P{shot.branch}"
        if shot.value is not None:
            grouped[branch].append(shot.value)
            n_tails = max(n_tails, shot.injected_tails)
        records.append(
            RunRecord(
                shot=shot_idx,
                injection_branch=branch,
                observable_value=math.nan if shot.value is None else shot.value,
                bell_outcomes=tuple(shot.bells),
            )
        )
    estimate = stderr = None
    n1 = len(grouped["P1"]) + len(grouped["none"])
    n0 = len(grouped["P0"])
    if trace_of_o is not None and (n0 or n1):
        estimates = []
        direct = np.array(grouped["P1"] + grouped["none"])
        if direct.size:
            estimates.append(tailed._branch_estimate(direct, trace_of_o, 1.0, False))
        if n0:
            estimates.append(
                tailed._branch_estimate(
                    np.array(grouped["P0"]), trace_of_o, float(2**n_tails - 1), True
                )
            )
        floor = 1e-30
        if all(v <= floor for _, v in estimates):
            estimate = float(np.mean([e for e, _ in estimates]))
            stderr = 0.0
        else:
            weights = [1.0 / max(v, floor) for _, v in estimates]
            estimate = float(
                sum(w * e for w, (e, _) in zip(weights, estimates)) / sum(weights)
            )
            stderr = float(1.0 / math.sqrt(sum(weights)))
    copies_after = {addr: len(slot.copies) for addr, slot in mem.slots.items()}
    return ExecutionResult(
        estimate=estimate,
        standard_error=stderr,
        shots=sched.shots,
        n_p0=n0,
        n_p1=n1,
        records=tuple(records),
        copies_after=copies_after,
        audit_consistent=mem.verify_conservation(),
    )


# ---------------------------------------------------------------------------
# Controlled unknown gate
# ---------------------------------------------------------------------------


def controlled_unknown(u: UnitaryOp, eigenstate: PureState, eigenvalue, tol=DEFAULT_TOL) -> UnitaryOp:
    """CSWAP · (I ⊗ U on the ancilla) · CSWAP on control ⊗ target ⊗ ancilla.

    The declared eigenpair pins the phase gauge of the black box: with the
    ancilla prepared in the eigenstate, the circuit acts on control and
    target as controlled-(U/eigenvalue) exactly.
    """
    d = u.dim
    lam = complex(eigenvalue)
    if abs(abs(lam) - 1.0) > tol:
        raise ValidationError(f"eigenvalue {lam} is not a phase")
    if eigenstate.dim != d:
        raise ValidationError(f"eigenstate dim {eigenstate.dim} != gate dim {d}")
    resid = np.linalg.norm(u.matrix @ eigenstate.amplitudes - lam * eigenstate.amplitudes)
    if resid > tol * d:
        raise ValidationError(f"declared eigenstate misses by {resid}")
    cs = gates.cswap(d)
    mid = np.kron(np.eye(2 * d, dtype=complex), u.matrix)
    return UnitaryOp(cs @ mid @ cs)


def controlled_unknown_channel(
    u: UnitaryOp, eigenstate: PureState, eigenvalue, tol=DEFAULT_TOL
) -> KrausChannel:
    """Reduced control-target dynamics with the ancilla in the eigenstate."""
    circuit = controlled_unknown(u, eigenstate, eigenvalue, tol=tol)
    d = u.dim
    phi = eigenstate.amplitudes
    kraus = []
    big = circuit.matrix.reshape(2 * d, d, 2 * d, d)
    embedded = np.einsum("amby,y->amb", big, phi)
    for m in range(d):
        kraus.append(embedded[:, m, :])
    return KrausChannel(kraus, tol=max(tol, 1e-9))


def controlled_unknown_mixed_output(u: UnitaryOp, rho_ct: DensityOperator) -> DensityOperator:
    """Reduced output with a completely mixed ancilla (the damped variant).

    Coherence between the control branches shrinks by tr(U)/d; exposed for
    study of the ancilla-preparation tradeoff, not used by the exact path.
    """
    d = u.dim
    cs = gates.cswap(d)
    circuit = cs @ np.kron(np.eye(2 * d, dtype=complex), u.matrix) @ cs
    full_in = np.kron(rho_ct.matrix, np.eye(d) / d)
    full_out = circuit @ full_in @ circuit.conj().T
    red = partial_trace_matrix(full_out, (2, d, d), [0, 1])
    return DensityOperator(red, (2, d))


def ideal_controlled(u: UnitaryOp, eigenvalue) -> UnitaryOp:
    """The gauge-fixed target: controlled-(U/eigenvalue)."""
    return UnitaryOp(gates.controlled(u.matrix / complex(eigenvalue)))


# ---------------------------------------------------------------------------
# Schedule text format
# ---------------------------------------------------------------------------

_STRATEGY_NAMES = {s.value: s for s in ByproductStrategy}


def serialize_schedule(sched: Schedule) -> str:
    lines = []
    for ins in sched.instructions:
        if isinstance(ins, Compose):
            lines.append(
                f"compose a={ins.addr1} b={ins.addr2} strategy={ins.strategy.value} dest={ins.dest}"
            )
        elif isinstance(ins, Inject):
            lines.append(f"inject target={ins.target}" + (f" bits={ins.bits}" if ins.bits else ""))
        elif isinstance(ins, Readout):
            if ins.label != "custom":
                lines.append(f"readout target={ins.target} obs={ins.label}")
            else:
                d = ins.observable.dim
                lines.append(
                    f"readout target={ins.target} obs=custom rows={d} "
                    f"data={format_complex_data(ins.observable.matrix)}"
                )
        elif isinstance(ins, Restore):
            lines.append(f"restore addr={ins.addr} copies={ins.copies}")
        elif isinstance(ins, SampleTail):
            lines.append(f"sampletail target={ins.target} tail={ins.tail}")
        else:
            raise ValidationError(f"unknown instruction {ins!r}")
    return "\n".join(lines) + "\n"


def _field_map(tokens, line_no):
    fields = {}
    for k, v, c in tokens[1:]:
        if k is None:
            raise ParseError(f"stray token {v!r}", line_no, c)
        fields[k] = (v, c)
    return fields


def _int_field(fields, key, line_no):
    if key not in fields:
        raise ParseError(f"missing {key}=", line_no, 1)
    try:
        return int(fields[key][0])
    except ValueError:
        raise ParseError(f"bad integer {fields[key][0]!r}", line_no, fields[key][1]) from None


def parse_instruction(line, line_no=1):
    tokens = _tokenize(line, line_no)
    if not tokens or tokens[0][0] is not None:
        raise ParseError("instruction line must start with a verb", line_no, 1)
    verb = tokens[0][1]
    fields = _field_map(tokens, line_no)
    if verb == "compose":
        name = fields.get("strategy", ("correction_table", 1))[0]
        if name not in _STRATEGY_NAMES:
            raise ParseError(f"unknown strategy {name!r}", line_no, fields["strategy"][1])
        return Compose(
            _int_field(fields, "a", line_no),
            _int_field(fields, "b", line_no),
            _STRATEGY_NAMES[name],
            _int_field(fields, "dest", line_no),
        )
    if verb == "inject":
        bits = fields.get("bits", ("", 1))[0]
        if any(c not in "01" for c in bits):
            raise ParseError(f"bad bitstring {bits!r}", line_no, fields["bits"][1])
        return Inject(_int_field(fields, "target", line_no), bits)
    if verb == "readout":
        if "obs" not in fields:
            raise ParseError("readout needs obs=", line_no, 1)
        label = fields["obs"][0]
        if label == "custom":
            rows = _int_field(fields, "rows", line_no)
            if "data" not in fields:
                raise ParseError("custom observable needs data=", line_no, 1)
            matrix = parse_complex_data(fields["data"][0], rows, rows, line_no, fields["data"][1])
            obs = Observable(matrix)
        else:
            try:
                obs = Observable(gates.pauli_string_matrix(label))
            except ValidationError:
                raise ParseError(f"bad observable {label!r}", line_no, fields["obs"][1]) from None
        return Readout(_int_field(fields, "target", line_no), obs, label)
    if verb == "restore":
        return Restore(_int_field(fields, "addr", line_no), _int_field(fields, "copies", line_no))
    if verb == "sampletail":
        return SampleTail(_int_field(fields, "target", line_no), _int_field(fields, "tail", line_no))
    raise ParseError(f"unknown instruction verb {verb!r}", line_no, 1)


def parse_schedule(text, shots=1, seed=0) -> Schedule:
    instructions = []
    for line_no, line in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        instructions.append(parse_instruction(line, line_no))
    return Schedule(tuple(instructions), shots=shots, seed=seed)
