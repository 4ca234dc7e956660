"""Channel-state duality: dual states, vectorization, Kraus extraction,
unitary dilation, superchannels, and comb application.

Conventions: the dual state of a channel E is (E ⊗ I) applied to the
normalized maximally entangled state |ω⟩ = Σ|ii⟩/√d. Site A (output,
head) is the left tensor factor, site B (input, tail) the right one; the
factor d dropped by this normalization reappears in `apply_via_choi`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NotCptpError, ValidationError
from .kernel import (
    DEFAULT_TOL,
    DensityOperator,
    KrausChannel,
    PureState,
    UnitaryOp,
    partial_trace_matrix,
)

RANK_TOL = 1e-12


def bell_state(d) -> np.ndarray:
    """Amplitudes of |ω⟩ = Σ|ii⟩/√d on H ⊗ H."""
    return np.eye(d, dtype=complex).reshape(-1) / math.sqrt(d)


def vec(a) -> np.ndarray:
    """Amplitudes of (A ⊗ I)|ω⟩ for a square operator A."""
    a = np.asarray(a, dtype=complex)
    return a.reshape(-1) / math.sqrt(a.shape[0])


def unvec(v) -> np.ndarray:
    """Inverse of `vec`: the operator whose vectorization is v."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = math.isqrt(v.size)
    if d * d != v.size:
        raise ValidationError(f"vector of size {v.size} is not an operator image")
    return v.reshape(d, d) * math.sqrt(d)


def reversal_permutation(site_dim, parts) -> np.ndarray:
    """Unitary R that reverses the order of `parts` equal subsystems."""
    dims = (site_dim,) * parts
    total = site_dim**parts
    m = np.zeros((total, total), dtype=complex)
    for idx in np.ndindex(dims):
        src = 0
        dst = 0
        for k, v in enumerate(idx):
            src = src * site_dim + v
        for v in reversed(idx):
            dst = dst * site_dim + v
        m[dst, src] = 1.0
    return m


def vectorize(a, parts=1) -> PureState:
    """Dual state of an operator over one bold tail or n bent per-part tails.

    With ``parts=1`` the state lives on H ⊗ H and pairs the head with a
    single high-dimensional tail, satisfying (A⊗I)|ω⟩ = (I⊗A^t)|ω⟩. With
    ``parts=n`` the tail group is wired in reversed subsystem order (the
    bent-wire convention), so the transposition rule becomes R A^t R for R
    the subsystem-reversal permutation.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"operator must be square, got shape {a.shape}")
    d = a.shape[0]
    norm = np.linalg.norm(a) / math.sqrt(d)
    if norm == 0.0:
        raise ValidationError("cannot vectorize the zero operator")
    if parts == 1:
        return PureState(vec(a) / norm, (d, d))
    s = round(d ** (1.0 / parts))
    if s**parts != d:
        raise ValidationError(f"dimension {d} is not a {parts}-fold power")
    r = reversal_permutation(s, parts)
    amp = (a @ r).reshape(-1) / (math.sqrt(d) * norm)
    return PureState(amp, (d, d))


@dataclass(frozen=True, eq=False)
class ChoiState:
    """Dual state of a channel: unit trace, PSD, maximally mixed tail."""

    d: int
    matrix: np.ndarray
    pure_amplitudes: np.ndarray | None

    def __init__(self, matrix, tol=DEFAULT_TOL, pure_amplitudes=None):
        m = np.asarray(matrix, dtype=complex)
        dim = m.shape[0]
        d = math.isqrt(dim)
        if d * d != dim or m.shape != (dim, dim):
            raise ValidationError(f"Choi matrix shape {m.shape} is not d²×d²")
        rho = DensityOperator(m, (d, d), tol=tol)
        tail = partial_trace_matrix(rho.matrix, (d, d), [1])
        resid = np.abs(tail - np.eye(d) / d).max()
        if resid > tol:
            raise NotCptpError(f"tr_A deviates from I/d by {resid}: not trace preserving")
        if pure_amplitudes is not None:
            pure_amplitudes = np.asarray(pure_amplitudes, dtype=complex).reshape(-1)
            pure_amplitudes.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "matrix", rho.matrix)
        object.__setattr__(self, "pure_amplitudes", pure_amplitudes)

    def density(self) -> DensityOperator:
        return DensityOperator(self.matrix, (self.d, self.d))

    def unitary(self, tol=DEFAULT_TOL) -> np.ndarray:
        """Recover U from a rank-1 dual state of a unitary channel."""
        if self.pure_amplitudes is not None:
            return unvec(self.pure_amplitudes)
        vals, vecs = np.linalg.eigh(self.matrix)
        if vals[-2] > tol * self.d:
            raise ValidationError("Choi state is not rank 1")
        return unvec(vecs[:, -1])


def choi_of_channel(ch: KrausChannel, tol=DEFAULT_TOL) -> ChoiState:
    """(E ⊗ I)(ω) built by conjugating the ebit with each Kraus operator."""
    if ch.dim_in != ch.dim_out:
        raise ValidationError("dual states are defined for dimension-preserving maps")
    d = ch.dim_in
    acc = np.zeros((d * d, d * d), dtype=complex)
    for k in ch.kraus_ops:
        v = vec(k)
        acc += np.outer(v, v.conj())
    pure = vec(ch.kraus_ops[0]) if len(ch.kraus_ops) == 1 else None
    return ChoiState(acc, tol=tol, pure_amplitudes=pure)


def choi_of_unitary(u, tol=DEFAULT_TOL) -> ChoiState:
    m = u.matrix if isinstance(u, UnitaryOp) else np.asarray(u, dtype=complex)
    v = vec(m)
    return ChoiState(np.outer(v, v.conj()), tol=tol, pure_amplitudes=v)


def apply_via_choi(choi: ChoiState, rho: DensityOperator) -> DensityOperator:
    """Readout of the channel action: d · tr_B[ω_E (I ⊗ ρ^t)]."""
    d = choi.d
    if rho.dim != d:
        raise DimensionMismatchError(f"state dim {rho.dim} != Choi site dim {d}")
    sandwich = choi.matrix @ np.kron(np.eye(d), rho.matrix.T)
    out = d * partial_trace_matrix(sandwich, (d, d), [0])
    return DensityOperator(out, rho.subsystem_dims)


def kraus_from_choi(choi: ChoiState, tol=DEFAULT_TOL) -> KrausChannel:
    """Kraus operators from the eigenvalue decomposition of the dual state."""
    d = choi.d
    vals, vecs = np.linalg.eigh(choi.matrix)
    cutoff = RANK_TOL * d
    kraus = [
        math.sqrt(d * lam) * vecs[:, i].reshape(d, d)
        for i, lam in enumerate(vals)
        if lam > cutoff
    ]
    if not kraus:
        raise NotCptpError("Choi state has no spectrum above the rank tolerance")
    return KrausChannel(kraus, tol=max(tol, 1e-9))


def dilate(ch: KrausChannel):
    """Unitary dilation (U, ancilla_dim) with K_i = ⟨i|U|0⟩ on the ancilla.

    The Kraus operators are stacked into an isometry which is completed to
    a unitary on system ⊗ ancilla by an orthonormal basis of its column
    complement. E(ρ) = tr_a U(ρ ⊗ |0⟩⟨0|)U† holds by construction.
    """
    d = ch.dim_in
    r = len(ch.kraus_ops)
    a = max(r, 1)
    iso = np.zeros((d * a, d), dtype=complex)
    for i, k in enumerate(ch.kraus_ops):
        # row block (s', i) of the isometry holds K_i
        for sp in range(d):
            iso[sp * a + i, :] = k[sp, :]
    u_svd, _, _ = np.linalg.svd(iso, full_matrices=True)
    complement = u_svd[:, d:]
    full = np.zeros((d * a, d * a), dtype=complex)
    cols = [s * a for s in range(d)]
    full[:, cols] = iso
    rest = [c for c in range(d * a) if c not in cols]
    full[:, rest] = complement
    return UnitaryOp(full), a


@dataclass(frozen=True, eq=False)
class Superchannel:
    """Channel-to-channel map realized by pre/post unitaries and a memory wire."""

    pre_unitary: UnitaryOp
    post_unitary: UnitaryOp
    system_dim: int
    ancilla_dim: int

    def __post_init__(self):
        total = self.system_dim * self.ancilla_dim
        if self.pre_unitary.dim != total or self.post_unitary.dim != total:
            raise DimensionMismatchError(
                f"pre/post unitaries must act on system*ancilla = {total}"
            )


def _embed_column(d, a):
    """Isometry ρ ↦ ρ ⊗ |0⟩⟨0| as a (d·a × d) matrix."""
    e0 = np.zeros((a, 1), dtype=complex)
    e0[0, 0] = 1.0
    return np.kron(np.eye(d, dtype=complex), e0)


def _trace_out_rows(d, a):
    """List of (d × d·a) matrices I ⊗ ⟨j| implementing the ancilla trace."""
    rows = []
    for j in range(a):
        ej = np.zeros((1, a), dtype=complex)
        ej[0, j] = 1.0
        rows.append(np.kron(np.eye(d, dtype=complex), ej))
    return rows


def apply_superchannel(s: Superchannel, ch: KrausChannel, tol=DEFAULT_TOL) -> KrausChannel:
    """ρ ↦ tr_a V (E ⊗ I_mem)(U (ρ ⊗ |0⟩⟨0|) U†) V† with E on the system wire."""
    d, a = s.system_dim, s.ancilla_dim
    if ch.dim_in != d or ch.dim_out != d:
        raise DimensionMismatchError(f"input channel dim {ch.dim_in} != system dim {d}")
    embed = _embed_column(d, a)
    outs = _trace_out_rows(d, a)
    pre = s.pre_unitary.matrix @ embed
    kraus = []
    for k in ch.kraus_ops:
        mid = np.kron(k, np.eye(a)) @ pre
        post = s.post_unitary.matrix @ mid
        for row in outs:
            kraus.append(row @ post)
    return KrausChannel(kraus, tol=tol)


def apply_superchannel_choi(s: Superchannel, choi: ChoiState, tol=DEFAULT_TOL) -> ChoiState:
    """Dual-state form: the Choi state of the transformed channel."""
    return choi_of_channel(apply_superchannel(s, kraus_from_choi(choi), tol=tol), tol=tol)


def superchannel_bent_action(s: Superchannel, choi: ChoiState, rho: DensityOperator) -> DensityOperator:
    """Bent-wire evaluation used as the dual route to `apply_superchannel`.

    The input wire of the stored dual state is connected by a partial
    transpose on the system wire: (E ⊗ I)(χ) = d tr_S[(ω_E ⊗ I)(I ⊗ χ^{T_S})]
    for a joint state χ of system and memory.
    """
    d, a = s.system_dim, s.ancilla_dim
    if rho.dim != d or choi.d != d:
        raise DimensionMismatchError("system dims disagree")
    embed = _embed_column(d, a)
    chi = s.pre_unitary.matrix @ embed @ rho.matrix @ embed.conj().T @ s.pre_unitary.matrix.conj().T
    # partial transpose on the system factor of chi (dims d, a)
    chi_t = chi.reshape(d, a, d, a).transpose(2, 1, 0, 3).reshape(d * a, d * a)
    big = np.kron(choi.matrix, np.eye(a)) @ np.kron(np.eye(d), chi_t)
    bent = d * partial_trace_matrix(big, (d, d, a), [0, 2])
    out = s.post_unitary.matrix @ bent @ s.post_unitary.matrix.conj().T
    reduced = partial_trace_matrix(out, (d, a), [0])
    return DensityOperator(reduced)


@dataclass(frozen=True, eq=False)
class Comb:
    """n-comb template: unitary teeth with a memory wire threading n−1 slots.

    Every tooth acts on system ⊗ memory; the memory starts at |0⟩ and is
    traced after the last tooth, while input channels act on the system
    wire between consecutive teeth.
    """

    system_dim: int
    memory_dim: int
    teeth: tuple[UnitaryOp, ...]

    def __init__(self, system_dim, memory_dim, teeth):
        teeth = tuple(teeth)
        if not teeth:
            raise ValidationError("a comb needs at least one tooth")
        total = system_dim * memory_dim
        for t in teeth:
            if t.dim != total:
                raise DimensionMismatchError(
                    f"tooth dim {t.dim} != system*memory = {total}"
                )
        object.__setattr__(self, "system_dim", int(system_dim))
        object.__setattr__(self, "memory_dim", int(memory_dim))
        object.__setattr__(self, "teeth", teeth)

    @property
    def slots(self):
        return len(self.teeth) - 1


def apply_comb(c: Comb, inputs, tol=DEFAULT_TOL) -> KrausChannel:
    """Thread the input channels through the comb's slots."""
    inputs = list(inputs)
    if len(inputs) != c.slots:
        raise ValidationError(f"comb has {c.slots} slots, got {len(inputs)} inputs")
    d, m = c.system_dim, c.memory_dim
    for ch in inputs:
        if ch.dim_in != d or ch.dim_out != d:
            raise DimensionMismatchError(f"slot channel dim {ch.dim_in} != system dim {d}")
    ops = [c.teeth[0].matrix @ _embed_column(d, m)]
    for slot, ch in enumerate(inputs):
        tooth = c.teeth[slot + 1].matrix
        ops = [tooth @ np.kron(k, np.eye(m)) @ op for op in ops for k in ch.kraus_ops]
    rows = _trace_out_rows(d, m)
    kraus = [row @ op for op in ops for row in rows]
    return KrausChannel(kraus, tol=tol)
