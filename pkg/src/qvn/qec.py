"""Quantum error correction toolkit: correctability and detection checks,
recovery construction, logical ebits, and toy-scale logical composition.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import gates
from .duality import bell_state
from .errors import (
    ConfigurationError,
    DimensionMismatchError,
    KlConditionError,
    ParseError,
    ValidationError,
)
from .kernel import DEFAULT_TOL, KrausChannel, PureState, RngStream, kron_all
from .memory import format_complex_data, parse_complex_data, _tokenize
from .uqt import BellBasis, ByproductStrategy, bell_measure_pair


@dataclass(frozen=True, eq=False)
class Code:
    """[[n, k, d]] code given by its encoding isometry V with V†V = I."""

    n: int
    k: int
    isometry: np.ndarray
    distance: int = 1
    name: str = "code"

    def __init__(self, n, k, isometry, distance=1, name="code", tol=DEFAULT_TOL):
        v = np.asarray(isometry, dtype=complex)
        if v.shape != (2**n, 2**k):
            raise ValidationError(
                f"isometry shape {v.shape} does not match [[{n},{k}]] code"
            )
        resid = np.abs(v.conj().T @ v - np.eye(2**k)).max()
        if resid > tol * 2**k:
            raise ValidationError(f"V†V deviates from identity by {resid}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "isometry", v)
        object.__setattr__(self, "distance", int(distance))
        object.__setattr__(self, "name", str(name))

    @property
    def projector(self) -> np.ndarray:
        return self.isometry @ self.isometry.conj().T

    @property
    def physical_dim(self):
        return 2**self.n

    @property
    def logical_dim(self):
        return 2**self.k


def bit_flip_code() -> Code:
    """3-qubit repetition code |b⟩ ↦ |bbb⟩."""
    v = np.zeros((8, 2), dtype=complex)
    v[0, 0] = 1.0
    v[7, 1] = 1.0
    return Code(3, 1, v, distance=1, name="bitflip3")


def phase_flip_code() -> Code:
    """Hadamard-rotated repetition code, protecting against single Z."""
    h3 = kron_all([gates.H, gates.H, gates.H])
    return Code(3, 1, h3 @ bit_flip_code().isometry, distance=1, name="phaseflip3")


def pauli_site_operator(token, n) -> np.ndarray:
    """Operator from a token like 'I', 'X0', or 'X0Z2' on n qubits."""
    token = token.strip()
    if token == "I":
        return np.eye(2**n, dtype=complex)
    parts = re.findall(r"([XYZ])(\d+)", token)
    if not parts or "".join(p + i for p, i in parts) != token:
        raise ValidationError(f"bad error token {token!r}")
    out = np.eye(2**n, dtype=complex)
    dims = (2,) * n
    for pauli, idx in parts:
        site = int(idx)
        if site >= n:
            raise ValidationError(f"site {site} out of range in token {token!r}")
        out = gates.embed_operator(gates.PAULI_1Q[pauli], [site], dims) @ out
    return out


def error_channel(errors, probabilities=None) -> KrausChannel:
    """Channel with Kraus √p_i E_i for trace-preserving error sets."""
    errors = [np.asarray(e, dtype=complex) for e in errors]
    if probabilities is None:
        probabilities = [1.0 / len(errors)] * len(errors)
    return KrausChannel([math.sqrt(p) * e for p, e in zip(probabilities, errors)])


@dataclass(frozen=True, eq=False)
class KlResult:
    satisfied: bool
    c: np.ndarray
    max_residual: float


@dataclass(frozen=True, eq=False)
class DetectionResult:
    satisfied: bool
    coefficients: np.ndarray
    max_residual: float


@dataclass(frozen=True, eq=False)
class Recovery:
    """Recovery channel; the first `n_correction` Kraus are the P F_k†/√d_k
    terms, the optional last one completes the map to trace preserving."""

    channel: KrausChannel
    n_correction: int


def _proportionality(m, p, tr_p):
    coeff = complex(np.trace(m)) / tr_p
    resid = float(np.abs(m - coeff * p).max())
    return coeff, resid


def check_kl(code: Code, errors, tol=DEFAULT_TOL) -> KlResult:
    """Test P E_i† E_j P = c_ij P for every error pair."""
    p = code.projector
    tr_p = float(np.trace(p).real)
    errors = [np.asarray(e, dtype=complex) for e in errors]
    for e in errors:
        if e.shape != p.shape:
            raise DimensionMismatchError("error operator does not match code dimension")
    m = len(errors)
    c = np.zeros((m, m), dtype=complex)
    worst = 0.0
    for i in range(m):
        for j in range(m):
            block = p @ errors[i].conj().T @ errors[j] @ p
            c[i, j], resid = _proportionality(block, p, tr_p)
            worst = max(worst, resid)
    return KlResult(worst <= tol, c, worst)


def check_detection(code: Code, errors, tol=DEFAULT_TOL) -> DetectionResult:
    """Test the weaker detection condition P E_i P = e_i P."""
    p = code.projector
    tr_p = float(np.trace(p).real)
    errors = [np.asarray(e, dtype=complex) for e in errors]
    coeffs = np.zeros(len(errors), dtype=complex)
    worst = 0.0
    for i, e in enumerate(errors):
        if e.shape != p.shape:
            raise DimensionMismatchError("error operator does not match code dimension")
        coeffs[i], resid = _proportionality(p @ e @ p, p, tr_p)
        worst = max(worst, resid)
    return DetectionResult(worst <= tol, coeffs, worst)


def build_recovery(code: Code, errors, tol=DEFAULT_TOL) -> Recovery:
    """Recovery Kraus R_k = P F_k†/√d_k from the diagonalized c matrix.

    The F_k = Σ_i W_ik E_i orthogonalize the errors on the code space; the
    map is completed to trace preserving by √(I − Σ R†R), which is
    supported only off the correctable subspace.
    """
    res = check_kl(code, errors, tol=tol)
    if not res.satisfied:
        raise KlConditionError(
            f"error set violates the correctability condition (residual {res.max_residual})",
            residual=res.max_residual,
        )
    errors = [np.asarray(e, dtype=complex) for e in errors]
    vals, w = np.linalg.eigh(res.c)
    p = code.projector
    cutoff = 1e-12 * max(1.0, float(vals.max()))
    kraus = []
    for idx in range(len(vals)):
        if vals[idx] <= cutoff:
            continue
        f_k = sum(w[i, idx] * errors[i] for i in range(len(errors)))
        kraus.append((p @ f_k.conj().T) / math.sqrt(float(vals[idx])))
    n_corr = len(kraus)
    acc = sum(r.conj().T @ r for r in kraus)
    gap = np.eye(p.shape[0]) - acc
    if np.abs(gap).max() > tol:
        gvals, gvecs = np.linalg.eigh(gap)
        gvals = np.clip(gvals, 0.0, None)
        kraus.append(gvecs @ np.diag(np.sqrt(gvals)) @ gvecs.conj().T)
    return Recovery(KrausChannel(kraus, tol=max(tol, 1e-9)), n_corr)


def logical_ebit(code: Code) -> PureState:
    """(V ⊗ V)|ω⟩: the encoded ebit across two code blocks."""
    v = code.isometry
    amp = np.kron(v, v) @ bell_state(code.logical_dim)
    return PureState(amp, (code.physical_dim, code.physical_dim))


@dataclass(frozen=True, eq=False)
class LogicalProgram:
    """A logical gate stored on an encoded ebit.

    Unlike a bare stored program, the dual state lives on the code space,
    so the head/tail marginals are P/2^k rather than maximally mixed. The
    correction table is the physical conjugation table of the gate.
    """

    code: Code
    gate: np.ndarray
    state: PureState
    correction_table: tuple[np.ndarray, ...]
    basis: BellBasis
    is_symmetric: bool


def logical_program(code: Code, gate, tol=DEFAULT_TOL) -> LogicalProgram:
    """Encoded program for a physical-level logical gate ([U, P] = 0).

    The encoding isometry must be real: a complex code basis reintroduces
    the transpose obstruction that symmetric gates are meant to avoid.
    """
    u = np.asarray(gate, dtype=complex)
    n_dim = code.physical_dim
    if u.shape != (n_dim, n_dim):
        raise DimensionMismatchError(f"gate shape {u.shape} != physical dim {n_dim}")
    if np.abs(code.isometry.imag).max() > tol:
        raise ValidationError(
            "logical composition needs a real encoding isometry"
        )
    p = code.projector
    if np.abs(u @ p - p @ u).max() > tol * n_dim:
        raise ValidationError("gate does not commute with the code projector")
    amp = np.kron(u @ code.isometry, code.isometry) @ bell_state(code.logical_dim)
    basis = BellBasis.qubit_product(code.n)
    table = tuple(u @ sigma @ u.conj().T for sigma in basis.paulis[1:])
    sym = bool(np.abs(u - u.T).max() <= tol)
    return LogicalProgram(
        code=code,
        gate=u,
        state=PureState(amp, (n_dim, n_dim)),
        correction_table=table,
        basis=basis,
        is_symmetric=sym,
    )


def decode_program(lp: LogicalProgram) -> np.ndarray:
    """Logical-space operator carried by an encoded program state."""
    v = lp.code.isometry
    n_dim = lp.code.physical_dim
    mat = lp.state.amplitudes.reshape(n_dim, n_dim)
    return math.sqrt(lp.code.logical_dim) * v.conj().T @ mat @ v.conj()


def logical_compose(
    p1: LogicalProgram,
    p2: LogicalProgram,
    strategy: ByproductStrategy,
    rng: RngStream,
    tol=DEFAULT_TOL,
):
    """Compose encoded programs by physical-level gate teleportation.

    Symmetric logical gates are required: the transpose-free pairing then
    needs only the physical correction table. Returns (result, shots_used).
    """
    if p1.code is not p2.code and not np.array_equal(p1.code.isometry, p2.code.isometry):
        raise ValidationError("programs live on different codes")
    if not p2.is_symmetric:
        raise ConfigurationError(
            "logical composition needs a symmetric logical gate on the second program"
        )
    if strategy is ByproductStrategy.SYMMETRIC_PAIR and not p2.is_symmetric:
        raise ConfigurationError("second program lacks symmetric factors")
    n_dim = p1.code.physical_dim
    shots = 0
    while True:
        shots += 1
        joint = PureState(
            np.kron(p1.state.amplitudes, p2.state.amplitudes), (n_dim,) * 4
        )
        k, _, post = bell_measure_pair(joint, 0, 3, p2.basis, rng)
        if strategy is ByproductStrategy.REPEAT_UNTIL_SUCCESS and k != 0:
            continue
        mat = post.tensor().transpose(1, 0).reshape(n_dim, n_dim)
        if k != 0:
            mat = p2.correction_table[k - 1] @ mat
        state = PureState(mat.reshape(-1), (n_dim, n_dim))
        gate = p2.gate @ p1.gate
        basis = p2.basis
        table = tuple(gate @ s @ gate.conj().T for s in basis.paulis[1:])
        result = LogicalProgram(
            code=p1.code,
            gate=gate,
            state=state,
            correction_table=table,
            basis=basis,
            is_symmetric=bool(np.abs(gate - gate.T).max() <= tol),
        )
        return result, shots


# ---------------------------------------------------------------------------
# Code documents (QVN1 with an isometry block)
# ---------------------------------------------------------------------------


def serialize_code(code: Code) -> str:
    header = f"QVN1 name={code.name} n={code.n} k={code.k} distance={code.distance}"
    iso = (
        f"isometry rows={code.physical_dim} cols={code.logical_dim} "
        f"data={format_complex_data(code.isometry)}"
    )
    return header + "\n" + iso + "\n"


def parse_code(text: str) -> Code:
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    header = None
    iso = None
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        tokens = _tokenize(line, line_no)
        if header is None:
            if not tokens or tokens[0][1] != "QVN1":
                raise ParseError("code document must start with a QVN1 header", line_no, 1)
            fields = {k: (v, c) for k, v, c in tokens[1:]}
            for key in ("name", "n", "k"):
                if key not in fields:
                    raise ParseError(f"code header needs {key}=", line_no, 1)
            try:
                header = (
                    fields["name"][0],
                    int(fields["n"][0]),
                    int(fields["k"][0]),
                    int(fields.get("distance", ("1", 1))[0]),
                )
            except ValueError:
                raise ParseError("bad integer in code header", line_no, 1) from None
            continue
        if tokens[0][1] != "isometry" or tokens[0][0] is not None:
            raise ParseError(f"unexpected line {line.strip()!r}", line_no, 1)
        fields = {k: (v, c) for k, v, c in tokens[1:]}
        for key in ("rows", "cols", "data"):
            if key not in fields:
                raise ParseError(f"isometry block needs {key}=", line_no, 1)
        try:
            rows, cols = int(fields["rows"][0]), int(fields["cols"][0])
        except ValueError:
            raise ParseError("bad isometry shape", line_no, 1) from None
        iso = parse_complex_data(fields["data"][0], rows, cols, line_no, fields["data"][1])
    if header is None:
        raise ParseError("empty code document", 1, 1)
    if iso is None:
        raise ParseError("code document lacks an isometry block", 1, 1)
    name, n, k, distance = header
    try:
        return Code(n, k, iso, distance=distance, name=name)
    except ValidationError as exc:
        raise ParseError(str(exc), 1, 1) from exc
