"""The four operational objects extracted from channels.

Correlations, assemblages, distributed measurements and teleportages are all
tables indexed by classical outcome (and input) strings; their entries are
probabilities or subnormalized operators.  This module extracts each object
from a channel, implements the general auxiliary-system extraction, and
provides the non-signalling predicates and the CHSH functional.

Classical labels are 0-indexed throughout; outcome/input axes of the stored
arrays run ``[a_1, ..., a_N, x_1, ..., x_N]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .channels import Channel
from .linalg import (
    DEFAULT_TOL,
    basis_state,
    frobenius,
    hermitize,
    kron_all,
    min_eig,
    partial_trace_dims,
    projector,
)

# extraction can leave eigenvalues at -O(eps); clamp threshold per contract
PSD_CLAMP = 1e-9


def _check_bases(bases: np.ndarray | None, n_vectors: int, dim: int) -> np.ndarray:
    """Validate an orthonormal family given as rows; default computational."""
    if bases is None:
        if n_vectors > dim:
            raise ValueError(f"cannot pick {n_vectors} orthonormal vectors in dim {dim}")
        return np.eye(dim, dtype=complex)[:n_vectors]
    b = np.asarray(bases, dtype=complex)
    if b.shape != (n_vectors, dim):
        raise ValueError(f"basis shape {b.shape} != ({n_vectors}, {dim})")
    gram = b @ b.conj().T
    if np.max(np.abs(gram - np.eye(n_vectors))) > 1e-9:
        raise ValueError("basis vectors are not orthonormal")
    return b


@dataclass(frozen=True)
class Correlation:
    """Conditional probability table ``p(a_1..a_N | x_1..x_N)``."""

    table: np.ndarray  # shape (d,)*N + (m,)*N

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=float)
        if t.ndim % 2 != 0:
            raise ValueError("table must have one outcome and one input axis per party")
        n = t.ndim // 2
        if n and (len(set(t.shape[:n])) > 1 or len(set(t.shape[n:])) > 1):
            raise ValueError("outcome / input counts must be uniform across parties")
        object.__setattr__(self, "table", t)

    @property
    def n_parties(self) -> int:
        return self.table.ndim // 2

    @property
    def n_outputs(self) -> int:
        return int(self.table.shape[0])

    @property
    def n_inputs(self) -> int:
        return int(self.table.shape[self.n_parties])

    def prob(self, outcomes: tuple[int, ...], inputs: tuple[int, ...]) -> float:
        return float(self.table[tuple(outcomes) + tuple(inputs)])

    def validate(self, tol: float = DEFAULT_TOL) -> None:
        if self.table.min() < -1e-12:
            raise ValueError(f"negative probability {self.table.min():.3e}")
        sums = self.table.sum(axis=tuple(range(self.n_parties)))
        if np.max(np.abs(sums - 1.0)) > tol:
            raise ValueError("fixed-input slices do not sum to 1")

    def coarse_grain(self, outcome_map, new_d: int) -> "Correlation":
        """Merge outcomes via ``outcome_map(party, a) -> coarse label``."""
        n, d, m = self.n_parties, self.n_outputs, self.n_inputs
        out = np.zeros((new_d,) * n + (m,) * n)
        for a_vec in product(range(d), repeat=n):
            coarse = tuple(outcome_map(k, a) for k, a in enumerate(a_vec))
            out[coarse] += self.table[a_vec]
        return Correlation(out)

    def marginal(self, keep_parties: tuple[int, ...]) -> "Correlation":
        """Marginalize outcomes of the remaining parties (inputs fixed at 0)."""
        n = self.n_parties
        drop = [k for k in range(n) if k not in keep_parties]
        t = self.table.sum(axis=tuple(drop))
        # fix dropped parties' inputs to 0 (valid when non-signalling)
        idx: list = [slice(None)] * len(keep_parties)
        for k in range(n):
            idx.append(slice(None) if k in keep_parties else 0)
        return Correlation(t[tuple(idx)])


@dataclass(frozen=True)
class Assemblage:
    """Subnormalized trusted-party states ``sigma_{a_vec|x_vec}``."""

    elements: np.ndarray  # shape (d,)*N + (m,)*N + (d_B, d_B)

    def __post_init__(self) -> None:
        e = np.asarray(self.elements, dtype=complex)
        if e.ndim < 2 or e.shape[-1] != e.shape[-2] or (e.ndim - 2) % 2 != 0:
            raise ValueError("elements must have shape (d,)*N + (m,)*N + (d_B, d_B)")
        object.__setattr__(self, "elements", e)

    @property
    def n_untrusted(self) -> int:
        return (self.elements.ndim - 2) // 2

    @property
    def n_outputs(self) -> int:
        return int(self.elements.shape[0])

    @property
    def n_inputs(self) -> int:
        return int(self.elements.shape[self.n_untrusted])

    @property
    def trusted_dim(self) -> int:
        return int(self.elements.shape[-1])

    def element(self, outcomes: tuple[int, ...], inputs: tuple[int, ...]) -> np.ndarray:
        return self.elements[tuple(outcomes) + tuple(inputs)]

    def reduced_state(self) -> np.ndarray:
        """Bob's marginal, averaged over input choices."""
        n = self.n_untrusted
        summed = self.elements.sum(axis=tuple(range(n)))
        return summed.mean(axis=tuple(range(n)))

    def validate(self, tol: float = DEFAULT_TOL) -> None:
        n, d, m = self.n_untrusted, self.n_outputs, self.n_inputs
        for a_vec in product(range(d), repeat=n):
            for x_vec in product(range(m), repeat=n):
                el = self.element(a_vec, x_vec)
                if frobenius(el - el.conj().T) > tol:
                    raise ValueError(f"element {a_vec}|{x_vec} is not Hermitian")
                if min_eig(el) < -PSD_CLAMP:
                    raise ValueError(
                        f"element {a_vec}|{x_vec} has eigenvalue {min_eig(el):.3e}"
                    )
        rho = self.reduced_state()
        summed = self.elements.sum(axis=tuple(range(n)))
        for x_vec in product(range(m), repeat=n):
            if frobenius(summed[x_vec] - rho) > tol:
                raise ValueError("reduced trusted state depends on the inputs")
        if abs(np.trace(rho) - 1.0) > tol:
            raise ValueError(f"reduced state trace {np.trace(rho).real:.6f} != 1")

    def to_correlation(self) -> Correlation:
        """Trace the trusted output, leaving the untrusted-party table."""
        return Correlation(
            np.real(np.trace(self.elements, axis1=-2, axis2=-1))
        )


@dataclass(frozen=True)
class DistributedMeasurement:
    """Joint POVM ``M_{a_vec}`` on the parties' quantum input spaces."""

    elements: np.ndarray  # shape (d,)*N + (D, D)
    input_dims: tuple[int, ...]

    def __post_init__(self) -> None:
        e = np.asarray(self.elements, dtype=complex)
        object.__setattr__(self, "elements", e)
        object.__setattr__(self, "input_dims", tuple(self.input_dims))
        d_tot = int(np.prod(self.input_dims))
        if e.shape[-2:] != (d_tot, d_tot):
            raise ValueError("element blocks do not match the product input dimension")

    @property
    def n_parties(self) -> int:
        return self.elements.ndim - 2

    @property
    def n_outputs(self) -> int:
        return int(self.elements.shape[0])

    def element(self, outcomes: tuple[int, ...]) -> np.ndarray:
        return self.elements[tuple(outcomes)]

    def validate(self, tol: float = DEFAULT_TOL) -> None:
        n, d = self.n_parties, self.n_outputs
        total = np.zeros(self.elements.shape[-2:], dtype=complex)
        for a_vec in product(range(d), repeat=n):
            el = self.element(a_vec)
            if min_eig(el) < -PSD_CLAMP:
                raise ValueError(f"element {a_vec} has eigenvalue {min_eig(el):.3e}")
            total += el
        if frobenius(total - np.eye(total.shape[0])) > tol:
            raise ValueError("elements do not sum to the identity")

    def probabilities(self, states: list[list[np.ndarray]]) -> Correlation:
        """Born-rule table for per-party preparations ``states[k][x]``."""
        n, d = self.n_parties, self.n_outputs
        m = len(states[0])
        table = np.zeros((d,) * n + (m,) * n)
        for x_vec in product(range(m), repeat=n):
            rho = kron_all([states[k][x_vec[k]] for k in range(n)])
            for a_vec in product(range(d), repeat=n):
                table[a_vec + x_vec] = np.trace(self.element(a_vec) @ rho).real
        return Correlation(table)


@dataclass(frozen=True)
class Teleportage:
    """Instrument ``{T_{a_vec}}`` stored as per-outcome Choi blocks.

    Block ``a_vec`` has entries ``J[(s,b),(t,b')] = T_a(|s><t|)[b,b']`` over
    the joint input space (factor order: inputs then trusted output), which
    makes every non-signalling condition a linear equality on stored data.
    """

    blocks: np.ndarray  # shape (d,)*N + (D_in*d_B, D_in*d_B)
    input_dims: tuple[int, ...]
    trusted_dim: int

    def __post_init__(self) -> None:
        b = np.asarray(self.blocks, dtype=complex)
        object.__setattr__(self, "blocks", b)
        object.__setattr__(self, "input_dims", tuple(self.input_dims))
        d_tot = int(np.prod(self.input_dims)) * self.trusted_dim
        if b.shape[-2:] != (d_tot, d_tot):
            raise ValueError("choi blocks do not match input x trusted dimension")

    @property
    def n_parties(self) -> int:
        return self.blocks.ndim - 2

    @property
    def n_outputs(self) -> int:
        return int(self.blocks.shape[0])

    @property
    def dim_in(self) -> int:
        return int(np.prod(self.input_dims))

    def block(self, outcomes: tuple[int, ...]) -> np.ndarray:
        return self.blocks[tuple(outcomes)]

    def apply(self, outcomes: tuple[int, ...], rho: np.ndarray) -> np.ndarray:
        """Evaluate ``T_a(rho)`` from the stored Choi block."""
        d_in, d_b = self.dim_in, self.trusted_dim
        j = self.block(outcomes).reshape(d_in, d_b, d_in, d_b)
        return np.einsum("us,ubsc->bc", np.asarray(rho, dtype=complex), j, optimize=True)

    def total_choi(self) -> np.ndarray:
        n, d = self.n_parties, self.n_outputs
        total = np.zeros(self.blocks.shape[-2:], dtype=complex)
        for a_vec in product(range(d), repeat=n):
            total += self.block(a_vec)
        return total

    def validate(self, tol: float = DEFAULT_TOL) -> None:
        n, d = self.n_parties, self.n_outputs
        for a_vec in product(range(d), repeat=n):
            if min_eig(self.block(a_vec)) < -PSD_CLAMP:
                raise ValueError(f"block {a_vec} is not completely positive")
        dims = [self.dim_in, self.trusted_dim]
        reduced = partial_trace_dims(self.total_choi(), dims, keep=[0])
        if frobenius(reduced - np.eye(self.dim_in)) > max(tol, 1e-8) * self.dim_in:
            raise ValueError("summed instrument is not trace preserving")


# ----------------------------------------------------------------------------
# Extraction from channels
# ----------------------------------------------------------------------------

def _untrusted_bases(
    ch: Channel, in_bases, out_bases
) -> tuple[list[np.ndarray], list[np.ndarray], int, int]:
    untrusted = ch.untrusted
    m_set = {p.dim_in for p in untrusted}
    d_set = {p.dim_out for p in untrusted}
    if len(m_set) != 1 or len(d_set) != 1:
        raise ValueError("untrusted parties must share input and output dimensions")
    m, d = m_set.pop(), d_set.pop()
    n = len(untrusted)
    if in_bases is None:
        in_bases = [None] * n
    if out_bases is None:
        out_bases = [None] * n
    ins = [_check_bases(in_bases[k], m, m) for k in range(n)]
    outs = [_check_bases(out_bases[k], d, d) for k in range(n)]
    return ins, outs, m, d


def correlations_from_channel(
    ch: Channel, in_bases=None, out_bases=None
) -> Correlation:
    """Bell-scenario table from basis preparations and basis measurements."""
    if ch.trusted_party is not None:
        raise ValueError("channel has a trusted party; extract an assemblage instead")
    ins, outs, m, d = _untrusted_bases(ch, in_bases, out_bases)
    n = ch.n_parties
    table = np.zeros((d,) * n + (m,) * n)
    for x_vec in product(range(m), repeat=n):
        rho = kron_all([projector(ins[k][x_vec[k]]) for k in range(n)])
        out = ch.apply(rho)
        for a_vec in product(range(d), repeat=n):
            vec = kron_all([outs[k][a_vec[k]].reshape(-1, 1) for k in range(n)]).reshape(-1)
            table[a_vec + x_vec] = np.real(vec.conj() @ out @ vec)
    return Correlation(np.clip(table, 0.0, None) if table.min() > -1e-12 else table)


def correlations_general(
    ch: Channel,
    preparations: list[list[np.ndarray]],
    povms: list[list[np.ndarray]],
) -> Correlation:
    """General extraction with per-party auxiliary systems.

    ``preparations[k][x]`` is a density matrix on in_k (x) aux_k and
    ``povms[k][a]`` a POVM element on out_k (x) aux_k; auxiliary dimensions
    are read off the shapes.  Basis preparations and measurements with
    trivial auxiliaries reduce to :func:`correlations_from_channel`.
    """
    if ch.trusted_party is not None:
        raise ValueError("channel has a trusted party; use assemblage_general instead")
    n = ch.n_parties
    if len(preparations) != n or len(povms) != n:
        raise ValueError("need one preparation family and one POVM per party")
    aux_dims = []
    for k, p in enumerate(ch.parties):
        d_prep = preparations[k][0].shape[0]
        if d_prep % p.dim_in:
            raise ValueError(f"party {p.label!r}: preparation dim {d_prep} incompatible")
        aux = d_prep // p.dim_in
        for rho in preparations[k]:
            if rho.shape != (d_prep, d_prep):
                raise ValueError("inconsistent preparation dimensions")
        total = np.zeros((p.dim_out * aux, p.dim_out * aux), dtype=complex)
        for el in povms[k]:
            if el.shape != total.shape:
                raise ValueError(f"party {p.label!r}: POVM dim mismatch")
            total += el
        if frobenius(total - np.eye(total.shape[0])) > 1e-8:
            raise ValueError(f"party {p.label!r}: POVM does not sum to identity")
        aux_dims.append(aux)

    m = len(preparations[0])
    d = len(povms[0])
    table = np.zeros((d,) * n + (m,) * n)
    # joint state over factors [in_1, aux_1, in_2, aux_2, ...]
    dims = []
    for k, p in enumerate(ch.parties):
        dims.extend([p.dim_in, aux_dims[k]])
    for x_vec in product(range(m), repeat=n):
        joint = preparations[0][x_vec[0]]
        for k in range(1, n):
            joint = np.kron(joint, preparations[k][x_vec[k]])
        out, out_dims = ch.apply_to_subsystems(
            joint, tuple(dims), tuple(2 * k for k in range(n))
        )
        for a_vec in product(range(d), repeat=n):
            effect = kron_all([povms[k][a_vec[k]] for k in range(n)])
            table[a_vec + x_vec] = np.real(np.trace(effect @ out))
    return Correlation(table)


def _require_trusted(ch: Channel):
    trusted = ch.trusted_party
    if trusted is None:
        raise ValueError("channel has no trusted party")
    return trusted


def assemblage_from_channel(
    ch: Channel, in_bases=None, out_bases=None, trusted_input: np.ndarray | None = None
) -> Assemblage:
    """Steering-scenario assemblage; the trusted input defaults to ``|0>``."""
    trusted = _require_trusted(ch)
    ins, outs, m, d = _untrusted_bases(ch, in_bases, out_bases)
    n = len(ch.untrusted)
    d_b = trusted.dim_out
    if trusted_input is None:
        trusted_input = projector(basis_state(trusted.dim_in, 0))
    else:
        trusted_input = np.asarray(trusted_input, dtype=complex)
        if trusted_input.ndim == 1:
            trusted_input = projector(trusted_input)
    elements = np.zeros((d,) * n + (m,) * n + (d_b, d_b), dtype=complex)
    for x_vec in product(range(m), repeat=n):
        rho = kron_all(
            [projector(ins[k][x_vec[k]]) for k in range(n)] + [trusted_input]
        )
        out = ch.apply(rho)
        out_t = out.reshape((d,) * n + (d_b,) + (d,) * n + (d_b,))
        for a_vec in product(range(d), repeat=n):
            block = out_t
            for k in range(n):
                v = outs[k][a_vec[k]]
                block = np.tensordot(v.conj(), block, axes=(0, 0))
                block = np.tensordot(v, block, axes=(0, n - k))
                # axes: contracting row axis then the matching column axis;
                # after both, block has one row/column pair fewer
            elements[a_vec + x_vec] = hermitize(block)
    return Assemblage(elements)


def assemblage_general(
    ch: Channel,
    preparations: list[list[np.ndarray]],
    povms: list[list[np.ndarray]],
    trusted_prep: np.ndarray | None = None,
) -> Assemblage:
    """General steering extraction; the trusted side may keep an auxiliary.

    ``trusted_prep`` is a density matrix on B_in (x) B_aux (default
    ``|0><0|`` with no auxiliary); the returned assemblage elements act on
    B_out (x) B_aux.
    """
    trusted = _require_trusted(ch)
    n = len(ch.untrusted)
    if len(preparations) != n or len(povms) != n:
        raise ValueError("need one preparation family and one POVM per untrusted party")
    if trusted_prep is None:
        trusted_prep = projector(basis_state(trusted.dim_in, 0))
    trusted_prep = np.asarray(trusted_prep, dtype=complex)
    if trusted_prep.shape[0] % trusted.dim_in:
        raise ValueError("trusted preparation incompatible with the trusted input")
    b_aux = trusted_prep.shape[0] // trusted.dim_in

    aux_dims = []
    for k, p in enumerate(ch.untrusted):
        aux_dims.append(preparations[k][0].shape[0] // p.dim_in)
    m = len(preparations[0])
    d = len(povms[0])
    d_block = trusted.dim_out * b_aux

    dims = []
    for k, p in enumerate(ch.untrusted):
        dims.extend([p.dim_in, aux_dims[k]])
    dims.extend([trusted.dim_in, b_aux])
    positions = tuple([2 * k for k in range(n)] + [2 * n])

    elements = np.zeros((d,) * n + (m,) * n + (d_block, d_block), dtype=complex)
    for x_vec in product(range(m), repeat=n):
        joint = preparations[0][x_vec[0]]
        for k in range(1, n):
            joint = np.kron(joint, preparations[k][x_vec[k]])
        joint = np.kron(joint, trusted_prep)
        out, out_dims = ch.apply_to_subsystems(joint, tuple(dims), positions)
        # factors now: [out_1, aux_1, ..., out_n, aux_n, B_out, B_aux]
        n_f = len(out_dims)
        t = out.reshape(tuple(out_dims) + tuple(out_dims))
        for a_vec in product(range(d), repeat=n):
            effect = kron_all([povms[k][a_vec[k]] for k in range(n)])
            eff_dims = []
            for k in range(n):
                eff_dims.extend([out_dims[2 * k], out_dims[2 * k + 1]])
            d_eff = int(np.prod(eff_dims))
            e_t = effect.reshape(tuple(eff_dims) + tuple(eff_dims))
            # tr_{1..N}[ (E (x) 1_B) out ]: contract E's column axes with out's
            # row axes and E's row axes with out's column axes.
            block = np.einsum(
                e_t,
                list(range(2 * n)) + list(range(2 * n + 2, 4 * n + 2)),
                t,
                list(range(2 * n + 2, 4 * n + 2))
                + [4 * n + 2, 4 * n + 3]
                + list(range(2 * n))
                + [4 * n + 4, 4 * n + 5],
                [4 * n + 2, 4 * n + 3, 4 * n + 4, 4 * n + 5],
                optimize=True,
            )
            elements[a_vec + x_vec] = hermitize(block.reshape(d_block, d_block))
    return Assemblage(elements)


def distributed_measurement_from_channel(
    ch: Channel, out_bases=None
) -> DistributedMeasurement:
    """POVM elements via the dual channel: ``M_a = dual(|a><a| tensor ...)``."""
    if ch.trusted_party is not None:
        raise ValueError("channel has a trusted party; extract a teleportage instead")
    d_set = {p.dim_out for p in ch.parties}
    if len(d_set) != 1:
        raise ValueError("classical output registers must share one dimension")
    d = d_set.pop()
    n = ch.n_parties
    if out_bases is None:
        out_bases = [None] * n
    outs = [_check_bases(out_bases[k], d, d) for k in range(n)]
    elements = np.zeros((d,) * n + (ch.dim_in, ch.dim_in), dtype=complex)
    for a_vec in product(range(d), repeat=n):
        effect = kron_all([projector(outs[k][a_vec[k]]) for k in range(n)])
        elements[a_vec] = hermitize(ch.dual_apply(effect))
    return DistributedMeasurement(elements, ch.dims_in)


def teleportage_from_channel(
    ch: Channel, out_bases=None, trusted_input: np.ndarray | None = None
) -> Teleportage:
    """Instrument blocks from channel evaluation on a matrix-unit input basis."""
    trusted = _require_trusted(ch)
    untrusted = ch.untrusted
    d_set = {p.dim_out for p in untrusted}
    if len(d_set) != 1:
        raise ValueError("classical output registers must share one dimension")
    d = d_set.pop()
    n = len(untrusted)
    if out_bases is None:
        out_bases = [None] * n
    outs = [_check_bases(out_bases[k], d, d) for k in range(n)]
    if trusted_input is None:
        trusted_input = projector(basis_state(trusted.dim_in, 0))
    else:
        trusted_input = np.asarray(trusted_input, dtype=complex)
        if trusted_input.ndim == 1:
            trusted_input = projector(trusted_input)

    d_in = int(np.prod([p.dim_in for p in untrusted]))
    d_b = trusted.dim_out
    blocks = np.zeros((d,) * n + (d_in * d_b, d_in * d_b), dtype=complex)
    out_dims = [d] * n + [d_b]
    for s in range(d_in):
        for t in range(d_in):
            unit = np.zeros((d_in, d_in), dtype=complex)
            unit[s, t] = 1.0
            out = ch.apply(np.kron(unit, trusted_input))
            o_t = out.reshape(tuple(out_dims) + tuple(out_dims))
            for a_vec in product(range(d), repeat=n):
                block = o_t
                for k in range(n):
                    v = outs[k][a_vec[k]]
                    block = np.tensordot(v.conj(), block, axes=(0, 0))
                    block = np.tensordot(v, block, axes=(0, n - k))
                # block is now T_a(|s><t|) on the trusted output
                view = blocks[a_vec].reshape(d_in, d_b, d_in, d_b)
                view[s, :, t, :] = block
    return Teleportage(blocks, tuple(p.dim_in for p in untrusted), d_b)


# ----------------------------------------------------------------------------
# Non-signalling predicates
# ----------------------------------------------------------------------------

def _proper_subsets(n: int):
    for r in range(1, n):
        yield from combinations(range(n), r)


def is_nonsignalling_correlation(
    c: Correlation, tol: float = DEFAULT_TOL
) -> tuple[bool, float]:
    """Marginal of every party subset must not depend on the others' inputs."""
    n, d, m = c.n_parties, c.n_outputs, c.n_inputs
    if n == 1:
        return True, 0.0
    worst = 0.0
    for keep in _proper_subsets(n):
        drop = tuple(k for k in range(n) if k not in keep)
        marg = c.table.sum(axis=drop)  # axes: a_keep..., x_1..x_n
        drop_in_axes = tuple(len(keep) + k for k in drop)
        mean = marg.mean(axis=drop_in_axes, keepdims=True)
        worst = max(worst, float(np.max(np.abs(marg - mean))))
    return worst < tol, worst


def is_nonsignalling_assemblage(
    a: Assemblage, tol: float = DEFAULT_TOL
) -> tuple[bool, float]:
    """Subset marginals input-independent, plus the fixed reduced-state rule."""
    n, m = a.n_untrusted, a.n_inputs
    worst = 0.0
    # fixed rho_B across the full input tuple
    summed = a.elements.sum(axis=tuple(range(n)))
    rho = summed.reshape(-1, a.trusted_dim, a.trusted_dim).mean(axis=0)
    worst = max(worst, float(np.max(np.abs(summed - rho))))
    for keep in _proper_subsets(n):
        drop = tuple(k for k in range(n) if k not in keep)
        marg = a.elements.sum(axis=drop)
        drop_in_axes = tuple(len(keep) + k for k in drop)
        mean = marg.mean(axis=drop_in_axes, keepdims=True)
        worst = max(worst, float(np.max(np.abs(marg - mean))))
    return worst < tol, worst


def is_nonsignalling_distributed_measurement(
    dm: DistributedMeasurement, tol: float = DEFAULT_TOL
) -> tuple[bool, float]:
    """Outcome marginals must be POVMs of the kept parties alone."""
    n, d = dm.n_parties, dm.n_outputs
    dims = list(dm.input_dims)
    worst = 0.0
    total = dm.elements.sum(axis=tuple(range(n)))
    worst = max(worst, frobenius(total - np.eye(total.shape[0])))
    for keep in _proper_subsets(n):
        drop = tuple(k for k in range(n) if k not in keep)
        d_drop = int(np.prod([dims[k] for k in drop]))
        marg = dm.elements.sum(axis=drop)
        for a_keep in product(range(d), repeat=len(keep)):
            block = marg[a_keep]
            candidate = partial_trace_dims(block, dims, keep) / d_drop
            target = _embed_povm(candidate, dims, keep)
            worst = max(worst, frobenius(block - target))
    return worst < tol, worst


def _embed_povm(op: np.ndarray, dims: list[int], keep: tuple[int, ...]) -> np.ndarray:
    from .linalg import embed_operator

    return embed_operator(op, dims, list(keep))


def is_nonsignalling_teleportage(
    t: Teleportage, tol: float = DEFAULT_TOL
) -> tuple[bool, float]:
    """Marginal instruments well-defined and the total channel constant."""
    n, d = t.n_parties, t.n_outputs
    d_b = t.trusted_dim
    dims_k = list(t.input_dims)
    worst = 0.0
    # grand sum: constant channel onto a fixed rho_B
    total = t.total_choi()
    rho_b = partial_trace_dims(total, [t.dim_in, d_b], keep=[1]) / t.dim_in
    worst = max(worst, frobenius(total - np.kron(np.eye(t.dim_in), rho_b)))
    for keep in _proper_subsets(n):
        drop = tuple(k for k in range(n) if k not in keep)
        d_drop = int(np.prod([dims_k[k] for k in drop]))
        marg = t.blocks.sum(axis=drop)
        full_dims = dims_k + [d_b]
        keep_full = list(keep) + [n]
        for a_keep in product(range(d), repeat=len(keep)):
            block = marg[a_keep]
            candidate = partial_trace_dims(block, full_dims, keep_full) / d_drop
            target = _embed_povm(candidate, full_dims, tuple(keep_full))
            worst = max(worst, frobenius(block - target))
    return worst < tol, worst


# ----------------------------------------------------------------------------
# CHSH
# ----------------------------------------------------------------------------

def chsh_value(c: Correlation) -> float:
    """``sum_{x,y} (-1)^{xy} E(x,y)`` with ``E = sum (-1)^{a+b} p(ab|xy)``."""
    if c.n_parties != 2 or c.n_outputs != 2 or c.n_inputs != 2:
        raise ValueError("CHSH needs the (2,2,2) scenario")
    signs = np.array([1.0, -1.0])
    e = np.einsum("a,b,abxy->xy", signs, signs, c.table)
    return float(e[0, 0] + e[0, 1] + e[1, 0] - e[1, 1])
