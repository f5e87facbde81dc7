"""JSON document formats for every workbench object.

Every document is ``{"kind": ..., "version": "1", "payload": ...}``; complex
numbers are stored as ``[re, im]`` pairs and matrices row-major.  Canonical
serialization emits table keys in ``(x_vec, a_vec)`` lexicographic order
(indices zero-padded), so repeated serializations are byte-identical.
"""

from __future__ import annotations

import json
from itertools import product

import numpy as np

from .causality import CausalityReport
from .channels import Channel, CircuitChannel, CircuitGate, CircuitParty, Party
from .linalg import SystemLayout, Subsystem
from .membership import FeasibilityReport
from .scenarios import Assemblage, Correlation, DistributedMeasurement, Teleportage

VERSION = "1"


class DocumentError(ValueError):
    """Schema or invariant violation, carrying the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# -- scalar / matrix encoding -------------------------------------------------

def _encode_complex(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _encode_matrix(m: np.ndarray) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[_encode_complex(z) for z in row] for row in m]


def _encode_vector(v: np.ndarray) -> list:
    return [_encode_complex(z) for z in np.asarray(v, dtype=complex).reshape(-1)]


def _decode_complex(value, path: str) -> complex:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(x, (int, float)) for x in value)
    ):
        raise DocumentError(path, "complex entries must be [re, im] number pairs")
    return complex(value[0], value[1])


def _decode_matrix(value, path: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    if not isinstance(value, list) or not value or not isinstance(value[0], list):
        raise DocumentError(path, "expected a row-major matrix (list of rows)")
    rows = len(value)
    cols = len(value[0])
    out = np.zeros((rows, cols), dtype=complex)
    for i, row in enumerate(value):
        if len(row) != cols:
            raise DocumentError(f"{path}[{i}]", "ragged matrix rows")
        for j, entry in enumerate(row):
            out[i, j] = _decode_complex(entry, f"{path}[{i}][{j}]")
    if shape is not None and out.shape != shape:
        raise DocumentError(path, f"matrix shape {out.shape} != expected {shape}")
    return out


def _decode_vector(value, path: str) -> np.ndarray:
    if not isinstance(value, list):
        raise DocumentError(path, "expected a list of [re, im] pairs")
    return np.array([_decode_complex(v, f"{path}[{k}]") for k, v in enumerate(value)])


def _index_key(prefix: str, vec: tuple[int, ...]) -> str:
    return prefix + ",".join(f"{v:03d}" for v in vec)


def _parse_index_key(key: str, prefix: str, length: int, path: str) -> tuple[int, ...]:
    if not key.startswith(prefix):
        raise DocumentError(path, f"key {key!r} must start with {prefix!r}")
    parts = key[len(prefix) :].split(",")
    if len(parts) != length:
        raise DocumentError(path, f"key {key!r} must carry {length} indices")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise DocumentError(path, f"non-integer index in key {key!r}") from None


def _table_key(x_vec: tuple[int, ...], a_vec: tuple[int, ...]) -> str:
    return _index_key("x=", x_vec) + "|" + _index_key("a=", a_vec)


# -- per-kind payloads ----------------------------------------------------------

def _channel_payload(ch: Channel) -> dict:
    return {
        "parties": [
            {
                "label": p.label,
                "dim_in": p.dim_in,
                "dim_out": p.dim_out,
                "trusted": p.trusted,
            }
            for p in ch.parties
        ],
        "choi": _encode_matrix(ch.choi),
    }


def _channel_from_payload(payload: dict, path: str, tol: float = 1e-7) -> Channel:
    parties = []
    for k, spec in enumerate(_field(payload, "parties", list, path)):
        sub = f"{path}.parties[{k}]"
        parties.append(
            Party(
                _field(spec, "label", str, sub),
                _field(spec, "dim_in", int, sub),
                _field(spec, "dim_out", int, sub),
                bool(spec.get("trusted", False)),
            )
        )
    choi = _decode_matrix(_field(payload, "choi", list, path), f"{path}.choi")
    try:
        ch = Channel(tuple(parties), choi)
        ch.validate(tol)
    except ValueError as exc:
        raise DocumentError(f"{path}.choi", str(exc)) from None
    return ch


def _circuit_payload(circ: CircuitChannel) -> dict:
    prep = np.asarray(circ.ancilla_prep)
    return {
        "registers": [
            {"label": s.label, "dim": s.dim, "role": s.role}
            for s in circ.registers.subsystems
        ],
        "parties": [
            {
                "label": p.label,
                "input_register": p.input_register,
                "output_registers": list(p.output_registers),
                "trusted": p.trusted,
            }
            for p in circ.parties
        ],
        "ancilla_prep": (
            {"form": "vector", "entries": _encode_vector(prep)}
            if prep.ndim == 1
            else {"form": "matrix", "entries": _encode_matrix(prep)}
        ),
        "gates": [
            {"unitary": _encode_matrix(g.unitary), "acts_on": list(g.acts_on)}
            for g in circ.gates
        ],
    }


def _circuit_from_payload(payload: dict, path: str) -> CircuitChannel:
    subs = []
    for k, spec in enumerate(_field(payload, "registers", list, path)):
        sub = f"{path}.registers[{k}]"
        subs.append(
            Subsystem(
                _field(spec, "label", str, sub),
                _field(spec, "dim", int, sub),
                spec.get("role", "ancilla"),
            )
        )
    parties = []
    for k, spec in enumerate(_field(payload, "parties", list, path)):
        sub = f"{path}.parties[{k}]"
        parties.append(
            CircuitParty(
                _field(spec, "label", str, sub),
                _field(spec, "input_register", str, sub),
                tuple(_field(spec, "output_registers", list, sub)),
                bool(spec.get("trusted", False)),
            )
        )
    prep_spec = _field(payload, "ancilla_prep", dict, path)
    form = _field(prep_spec, "form", str, f"{path}.ancilla_prep")
    if form == "vector":
        prep = _decode_vector(prep_spec["entries"], f"{path}.ancilla_prep.entries")
    elif form == "matrix":
        prep = _decode_matrix(prep_spec["entries"], f"{path}.ancilla_prep.entries")
    else:
        raise DocumentError(f"{path}.ancilla_prep.form", f"unknown form {form!r}")
    gates = []
    for k, spec in enumerate(_field(payload, "gates", list, path)):
        sub = f"{path}.gates[{k}]"
        gates.append(
            CircuitGate(
                _decode_matrix(_field(spec, "unitary", list, sub), f"{sub}.unitary"),
                tuple(_field(spec, "acts_on", list, sub)),
            )
        )
    try:
        circ = CircuitChannel(SystemLayout(tuple(subs)), tuple(parties), prep, tuple(gates))
        circ.validate()
    except ValueError as exc:
        raise DocumentError(path, str(exc)) from None
    return circ


def _correlation_payload(c: Correlation) -> dict:
    n, d, m = c.n_parties, c.n_outputs, c.n_inputs
    entries = {}
    for x_vec in product(range(m), repeat=n):
        for a_vec in product(range(d), repeat=n):
            entries[_table_key(x_vec, a_vec)] = float(c.table[a_vec + x_vec])
    return {"n_parties": n, "n_inputs": m, "n_outputs": d, "entries": entries}


def _correlation_from_payload(payload: dict, path: str) -> Correlation:
    n = _field(payload, "n_parties", int, path)
    m = _field(payload, "n_inputs", int, path)
    d = _field(payload, "n_outputs", int, path)
    entries = _field(payload, "entries", dict, path)
    table = np.zeros((d,) * n + (m,) * n)
    expected = (m**n) * (d**n)
    if len(entries) != expected:
        raise DocumentError(f"{path}.entries", f"expected {expected} entries")
    for key, value in entries.items():
        x_part, _, a_part = key.partition("|")
        x_vec = _parse_index_key(x_part, "x=", n, f"{path}.entries")
        a_vec = _parse_index_key(a_part, "a=", n, f"{path}.entries")
        if not isinstance(value, (int, float)):
            raise DocumentError(f"{path}.entries[{key!r}]", "probability must be a number")
        try:
            table[a_vec + x_vec] = float(value)
        except IndexError:
            raise DocumentError(f"{path}.entries[{key!r}]", "index out of range") from None
    try:
        c = Correlation(table)
        c.validate(1e-7)
    except ValueError as exc:
        raise DocumentError(f"{path}.entries", str(exc)) from None
    return c


def _assemblage_payload(a: Assemblage) -> dict:
    n, d, m = a.n_untrusted, a.n_outputs, a.n_inputs
    elements = {}
    for x_vec in product(range(m), repeat=n):
        for a_vec in product(range(d), repeat=n):
            elements[_table_key(x_vec, a_vec)] = _encode_matrix(a.element(a_vec, x_vec))
    return {
        "n_untrusted": n,
        "n_inputs": m,
        "n_outputs": d,
        "trusted_dim": a.trusted_dim,
        "elements": elements,
    }


def _assemblage_from_payload(payload: dict, path: str) -> Assemblage:
    n = _field(payload, "n_untrusted", int, path)
    m = _field(payload, "n_inputs", int, path)
    d = _field(payload, "n_outputs", int, path)
    d_b = _field(payload, "trusted_dim", int, path)
    raw = _field(payload, "elements", dict, path)
    elements = np.zeros((d,) * n + (m,) * n + (d_b, d_b), dtype=complex)
    for key, value in raw.items():
        x_part, _, a_part = key.partition("|")
        x_vec = _parse_index_key(x_part, "x=", n, f"{path}.elements")
        a_vec = _parse_index_key(a_part, "a=", n, f"{path}.elements")
        elements[a_vec + x_vec] = _decode_matrix(
            value, f"{path}.elements[{key!r}]", (d_b, d_b)
        )
    try:
        a = Assemblage(elements)
        a.validate(1e-7)
    except ValueError as exc:
        raise DocumentError(f"{path}.elements", str(exc)) from None
    return a


def _measurement_payload(dm: DistributedMeasurement) -> dict:
    n, d = dm.n_parties, dm.n_outputs
    elements = {}
    for a_vec in product(range(d), repeat=n):
        elements[_index_key("a=", a_vec)] = _encode_matrix(dm.element(a_vec))
    return {
        "input_dims": list(dm.input_dims),
        "n_outputs": d,
        "elements": elements,
    }


def _measurement_from_payload(payload: dict, path: str) -> DistributedMeasurement:
    dims = tuple(_field(payload, "input_dims", list, path))
    d = _field(payload, "n_outputs", int, path)
    n = len(dims)
    d_tot = int(np.prod(dims))
    raw = _field(payload, "elements", dict, path)
    elements = np.zeros((d,) * n + (d_tot, d_tot), dtype=complex)
    for key, value in raw.items():
        a_vec = _parse_index_key(key, "a=", n, f"{path}.elements")
        elements[a_vec] = _decode_matrix(value, f"{path}.elements[{key!r}]", (d_tot, d_tot))
    try:
        dm = DistributedMeasurement(elements, dims)
        dm.validate(1e-7)
    except ValueError as exc:
        raise DocumentError(f"{path}.elements", str(exc)) from None
    return dm


def _teleportage_payload(t: Teleportage) -> dict:
    n, d = t.n_parties, t.n_outputs
    blocks = {}
    for a_vec in product(range(d), repeat=n):
        blocks[_index_key("a=", a_vec)] = _encode_matrix(t.block(a_vec))
    return {
        "input_dims": list(t.input_dims),
        "n_outputs": d,
        "trusted_dim": t.trusted_dim,
        "blocks": blocks,
    }


def _teleportage_from_payload(payload: dict, path: str) -> Teleportage:
    dims = tuple(_field(payload, "input_dims", list, path))
    d = _field(payload, "n_outputs", int, path)
    d_b = _field(payload, "trusted_dim", int, path)
    n = len(dims)
    d_tot = int(np.prod(dims)) * d_b
    raw = _field(payload, "blocks", dict, path)
    blocks = np.zeros((d,) * n + (d_tot, d_tot), dtype=complex)
    for key, value in raw.items():
        a_vec = _parse_index_key(key, "a=", n, f"{path}.blocks")
        blocks[a_vec] = _decode_matrix(value, f"{path}.blocks[{key!r}]", (d_tot, d_tot))
    try:
        t = Teleportage(blocks, dims, d_b)
        t.validate(1e-7)
    except ValueError as exc:
        raise DocumentError(f"{path}.blocks", str(exc)) from None
    return t


def causality_report_payload(rep: CausalityReport) -> dict:
    return {
        "parties": list(rep.parties),
        "causal": rep.causal,
        "max_residual": rep.max_residual,
        "tol": rep.tol,
        "checks": [
            {
                "sender": list(c.sender),
                "receiver": list(c.receiver),
                "semicausal": c.semicausal,
                "residual": c.residual,
            }
            for c in rep.checks
        ],
    }


def feasibility_report_payload(rep: FeasibilityReport) -> dict:
    out = {
        "status": rep.status,
        "residual": rep.residual,
        "iterations": rep.iterations,
        "detail": rep.detail,
    }
    if rep.certificate and "weights" in rep.certificate:
        out["certificate"] = {"weights": [float(w) for w in rep.certificate["weights"]]}
    elif rep.certificate and "states" in rep.certificate:
        out["certificate"] = {
            "states": [_encode_matrix(s) for s in rep.certificate["states"]]
        }
    elif rep.certificate and "moment_matrix" in rep.certificate:
        out["certificate"] = {
            "moment_matrix": _encode_matrix(rep.certificate["moment_matrix"].matrix)
        }
    return out


# -- top level ------------------------------------------------------------------

_KIND_BY_TYPE = {
    Channel: "channel",
    CircuitChannel: "circuit",
    Correlation: "correlation",
    Assemblage: "assemblage",
    DistributedMeasurement: "distributed-measurement",
    Teleportage: "teleportage",
}


def _field(payload, name: str, typ, path: str):
    if not isinstance(payload, dict) or name not in payload:
        raise DocumentError(path, f"missing field {name!r}")
    value = payload[name]
    if typ is int and isinstance(value, bool):
        raise DocumentError(f"{path}.{name}", "expected an integer")
    if not isinstance(value, typ):
        raise DocumentError(f"{path}.{name}", f"expected {typ.__name__}")
    return value


def serialize(obj) -> str:
    """Serialize a workbench object to canonical JSON text."""
    if isinstance(obj, Channel):
        payload = _channel_payload(obj)
    elif isinstance(obj, CircuitChannel):
        payload = _circuit_payload(obj)
    elif isinstance(obj, Correlation):
        payload = _correlation_payload(obj)
    elif isinstance(obj, Assemblage):
        payload = _assemblage_payload(obj)
    elif isinstance(obj, DistributedMeasurement):
        payload = _measurement_payload(obj)
    elif isinstance(obj, Teleportage):
        payload = _teleportage_payload(obj)
    elif isinstance(obj, CausalityReport):
        payload = causality_report_payload(obj)
        return json.dumps(
            {"kind": "report", "version": VERSION, "payload": payload}, indent=2
        )
    elif isinstance(obj, FeasibilityReport):
        payload = feasibility_report_payload(obj)
        return json.dumps(
            {"kind": "report", "version": VERSION, "payload": payload}, indent=2
        )
    else:
        raise DocumentError("$", f"cannot serialize objects of type {type(obj).__name__}")
    kind = _KIND_BY_TYPE[type(obj)]
    return json.dumps({"kind": kind, "version": VERSION, "payload": payload}, indent=2)


def parse(text: str):
    """Parse a workbench document, validating schema and object invariants."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError("$", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise DocumentError("$", "document must be a JSON object")
    kind = _field(doc, "kind", str, "$")
    version = _field(doc, "version", str, "$")
    if version != VERSION:
        raise DocumentError("$.version", f"unsupported version {version!r}")
    payload = _field(doc, "payload", dict, "$")
    if kind == "channel":
        return _channel_from_payload(payload, "$.payload")
    if kind == "circuit":
        return _circuit_from_payload(payload, "$.payload")
    if kind == "correlation":
        return _correlation_from_payload(payload, "$.payload")
    if kind == "assemblage":
        return _assemblage_from_payload(payload, "$.payload")
    if kind == "distributed-measurement":
        return _measurement_from_payload(payload, "$.payload")
    if kind == "teleportage":
        return _teleportage_from_payload(payload, "$.payload")
    raise DocumentError("$.kind", f"unknown document kind {kind!r}")
