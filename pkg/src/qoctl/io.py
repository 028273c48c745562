"""Problem files, pulse files, and run artifacts.

Problem files are strict JSON: every key must be recognized, and errors name
the offending entry by its dotted path from the file root ("ensemble.bins").
Complex matrices are encoded as {"re": [[...]], "im": [[...]]}; "im" may be
omitted when zero.  parse_problem resolves every default, so serializing the
result and parsing it again is a fixed point.

Pulse files are plain CSV with "#"-prefixed metadata lines, durations in
seconds and amplitudes in rad/s.  All emitted numbers use 17 significant
digits, enough for exact float round-trips: reloading a pulse and
re-evaluating it reproduces the recorded fidelity bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatchError, ProblemFileError, ValidationError
from .model import ControlChannel, ControlSequence, ControlSystem, QuantumChannel
from .optimizers import (
    TERMINATION_GOAL,
    TERMINATION_MAX_ITER,
    TERMINATION_STALLED,
    AdiabaticConfig,
    CrabConfig,
    GoatConfig,
    GrapeConfig,
    KrotovConfig,
    LyapunovConfig,
    OptimizationResult,
    SaConfig,
    SagrapeConfig,
    SmpConfig,
    adiabatic_run,
    crab_run,
    goat_run,
    grape_run,
    krotov_run,
    lyapunov_run,
    sa_run,
    sagrape_run,
    smp_run,
)
from .problems import (
    ControlProblem,
    EnsembleDistribution,
    GateTarget,
    PenaltyConfig,
    StateTarget,
    ensemble_performance,
    penalty_value,
)
from .systems import SpinSystemSpec, build_spin_system, standard_distribution, standard_gate

FORMAT_VERSION = 1
FLOAT_FORMAT = "%.17g"

OPTIMIZERS = {
    "grape": (GrapeConfig, grape_run),
    "krotov": (KrotovConfig, krotov_run),
    "crab": (CrabConfig, crab_run),
    "goat": (GoatConfig, goat_run),
    "sa": (SaConfig, sa_run),
    "smp": (SmpConfig, smp_run),
    "lyapunov": (LyapunovConfig, lyapunov_run),
    "adiabatic": (AdiabaticConfig, adiabatic_run),
    "sagrape": (SagrapeConfig, sagrape_run),
}

EXIT_CODES = {TERMINATION_GOAL: 0, TERMINATION_MAX_ITER: 2, TERMINATION_STALLED: 3}


@dataclass(frozen=True)
class LoadedProblem:
    """A fully validated problem file: physics, algorithm, and echo document."""

    problem: ControlProblem
    algorithm: str
    config: Any
    seed: int
    document: dict


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ProblemFileError("expected a JSON object", key=path)
    return node


def _check_keys(node: dict, path: str, allowed) -> None:
    for key in node:
        if key not in allowed:
            raise ProblemFileError("unrecognized key", key=_join(path, key))


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProblemFileError("expected an integer", key=path)
    return value


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError("expected a number", key=path)
    return float(value)


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise ProblemFileError("expected a string", key=path)
    return value


def _as_list(value, path: str) -> list:
    if not isinstance(value, list):
        raise ProblemFileError("expected an array", key=path)
    return value


def decode_matrix(node, path: str) -> np.ndarray:
    """{"re": [[...]], "im": [[...]]} -> complex matrix; "im" defaults to 0."""
    node = _mapping(node, path)
    _check_keys(node, path, {"re", "im"})
    if "re" not in node:
        raise ProblemFileError("missing required key", key=_join(path, "re"))
    try:
        re = np.array(node["re"], dtype=float)
    except (TypeError, ValueError):
        raise ProblemFileError("must be a rectangular numeric array", key=_join(path, "re")) from None
    if "im" in node:
        try:
            im = np.array(node["im"], dtype=float)
        except (TypeError, ValueError):
            raise ProblemFileError("must be a rectangular numeric array", key=_join(path, "im")) from None
        if im.shape != re.shape:
            raise ProblemFileError('"re" and "im" must have the same shape', key=path)
    else:
        im = np.zeros_like(re)
    return re + 1j * im


def encode_matrix(matrix) -> dict:
    m = np.asarray(matrix, dtype=np.complex128)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def _decode_square(node, path: str) -> np.ndarray:
    m = decode_matrix(node, path)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ProblemFileError("expected a square matrix", key=path)
    return m


def _decode_vector(node, path: str) -> np.ndarray:
    v = decode_matrix(node, path)
    if v.ndim != 1:
        raise ProblemFileError("expected a 1-D array", key=path)
    return v


def _exactly_one(node: dict, path: str, options) -> str:
    present = [k for k in options if k in node]
    if len(present) != 1:
        raise ProblemFileError(
            f"exactly one of {sorted(options)} is required", key=path
        )
    return present[0]


def _parse_system(node, path: str) -> tuple[ControlSystem, dict]:
    node = _mapping(node, path)
    _check_keys(node, path, {"spin", "raw"})
    form = _exactly_one(node, path, {"spin", "raw"})
    if form == "spin":
        sub = _mapping(node["spin"], _join(path, "spin"))
        sp = _join(path, "spin")
        _check_keys(sub, sp, {"n_qubits", "detunings_hz", "couplings_hz", "axes", "max_amplitude_hz"})
        if "n_qubits" not in sub:
            raise ProblemFileError("missing required key", key=_join(sp, "n_qubits"))
        n = _as_int(sub["n_qubits"], _join(sp, "n_qubits"))
        detunings = [
            _as_float(x, _join(sp, "detunings_hz"))
            for x in _as_list(sub.get("detunings_hz", [0.0] * max(n, 0)), _join(sp, "detunings_hz"))
        ]
        if "couplings_hz" in sub:
            couplings = tuple(
                tuple(_as_float(x, _join(sp, "couplings_hz")) for x in _as_list(row, _join(sp, "couplings_hz")))
                for row in _as_list(sub["couplings_hz"], _join(sp, "couplings_hz"))
            )
        else:
            couplings = tuple((0.0,) * n for _ in range(max(n, 0)))
        axes = tuple(
            _as_str(a, _join(sp, "axes")) for a in _as_list(sub.get("axes", []), _join(sp, "axes"))
        )
        max_amp = _as_float(sub.get("max_amplitude_hz", 1.0), _join(sp, "max_amplitude_hz"))
        try:
            spec = SpinSystemSpec(
                n_qubits=n,
                detunings_hz=tuple(detunings),
                couplings_hz=couplings,
                axes=axes,
                max_amplitude_hz=max_amp,
            )
        except (ValidationError, DimensionMismatchError) as e:
            raise ProblemFileError(str(e), key=sp) from None
        system = build_spin_system(spec)
        resolved = {
            "spin": {
                "n_qubits": spec.n_qubits,
                "detunings_hz": list(spec.detunings_hz),
                "couplings_hz": [list(row) for row in spec.couplings_hz],
                "axes": list(spec.axes),
                "max_amplitude_hz": spec.max_amplitude_hz,
            }
        }
        return system, resolved
    sub = _mapping(node["raw"], _join(path, "raw"))
    rp = _join(path, "raw")
    _check_keys(sub, rp, {"hamiltonian", "channels"})
    if "hamiltonian" not in sub:
        raise ProblemFileError("missing required key", key=_join(rp, "hamiltonian"))
    if "channels" not in sub:
        raise ProblemFileError("missing required key", key=_join(rp, "channels"))
    h = _decode_square(sub["hamiltonian"], _join(rp, "hamiltonian"))
    entries = _as_list(sub["channels"], _join(rp, "channels"))
    if not entries:
        raise ProblemFileError("at least one channel is required", key=_join(rp, "channels"))
    channels = []
    for i, entry in enumerate(entries):
        cp = f"{rp}.channels[{i}]"
        entry = _mapping(entry, cp)
        _check_keys(entry, cp, {"operator", "max_amplitude", "label"})
        for req in ("operator", "max_amplitude"):
            if req not in entry:
                raise ProblemFileError("missing required key", key=_join(cp, req))
        op = _decode_square(entry["operator"], _join(cp, "operator"))
        bound = _as_float(entry["max_amplitude"], _join(cp, "max_amplitude"))
        label = _as_str(entry.get("label", ""), _join(cp, "label"))
        try:
            channels.append(ControlChannel(operator=op, max_amplitude=bound, label=label))
        except (ValidationError, DimensionMismatchError) as e:
            raise ProblemFileError(str(e), key=cp) from None
    try:
        system = ControlSystem(h_system=h, channels=tuple(channels))
    except (ValidationError, DimensionMismatchError) as e:
        raise ProblemFileError(str(e), key=rp) from None
    resolved = {
        "raw": {
            "hamiltonian": encode_matrix(system.h_system),
            "channels": [
                {
                    "operator": encode_matrix(ch.operator),
                    "max_amplitude": ch.max_amplitude,
                    "label": ch.label,
                }
                for ch in system.channels
            ],
        }
    }
    return system, resolved


def _parse_state(node, path: str) -> np.ndarray:
    node = _mapping(node, path)
    _check_keys(node, path, {"vector", "matrix"})
    form = _exactly_one(node, path, {"vector", "matrix"})
    if form == "vector":
        return _decode_vector(node["vector"], _join(path, "vector"))
    return _decode_square(node["matrix"], _join(path, "matrix"))


def _parse_target(node, path: str, dim: int):
    node = _mapping(node, path)
    _check_keys(node, path, {"gate", "state"})
    form = _exactly_one(node, path, {"gate", "state"})
    if form == "gate":
        sub = _mapping(node["gate"], _join(path, "gate"))
        gp = _join(path, "gate")
        _check_keys(sub, gp, {"name", "unitary"})
        kind = _exactly_one(sub, gp, {"name", "unitary"})
        if kind == "name":
            name = _as_str(sub["name"], _join(gp, "name"))
            n_qubits = int(round(np.log2(dim)))
            if 2**n_qubits != dim:
                raise ProblemFileError(
                    f"named gates need a power-of-two system dimension, got {dim}",
                    key=_join(gp, "name"),
                )
            try:
                unitary = standard_gate(name, n_qubits)
            except (ValidationError, DimensionMismatchError) as e:
                raise ProblemFileError(str(e), key=_join(gp, "name")) from None
            key, resolved = _join(gp, "name"), {"gate": {"name": name}}
        else:
            unitary = _decode_square(sub["unitary"], _join(gp, "unitary"))
            key, resolved = _join(gp, "unitary"), None
        try:
            target = GateTarget(unitary)
        except (ValidationError, DimensionMismatchError) as e:
            raise ProblemFileError(str(e), key=key) from None
        if resolved is None:
            resolved = {"gate": {"unitary": encode_matrix(target.unitary)}}
        return target, resolved
    sub = _mapping(node["state"], _join(path, "state"))
    st = _join(path, "state")
    _check_keys(sub, st, {"kind", "initial", "final"})
    for req in ("initial", "final"):
        if req not in sub:
            raise ProblemFileError("missing required key", key=_join(st, req))
    kind = _as_str(sub.get("kind", "uhlmann"), _join(st, "kind"))
    initial = _parse_state(sub["initial"], _join(st, "initial"))
    final = _parse_state(sub["final"], _join(st, "final"))
    try:
        target = StateTarget(initial=initial, final=final, kind=kind)
    except (ValidationError, DimensionMismatchError) as e:
        raise ProblemFileError(str(e), key=st) from None

    def echo(arr: np.ndarray) -> dict:
        if arr.ndim == 1:
            return {"vector": encode_matrix(arr)}
        return {"matrix": encode_matrix(arr)}

    resolved = {"state": {"kind": kind, "initial": echo(initial), "final": echo(final)}}
    return target, resolved


def _parse_ensemble(node, path: str) -> tuple[EnsembleDistribution, dict]:
    if node is None:
        dist = EnsembleDistribution.single()
    else:
        node = _mapping(node, path)
        _check_keys(node, path, {"bins", "distribution", "half_width", "n_bins"})
        if "bins" in node and ("distribution" in node or "half_width" in node or "n_bins" in node):
            raise ProblemFileError(
                'give either explicit "bins" or a distribution description, not both', key=path
            )
        if "bins" in node:
            bp = _join(path, "bins")
            entries = _as_list(node["bins"], bp)
            scales, probs = [], []
            for i, entry in enumerate(entries):
                ep = f"{bp}[{i}]"
                entry = _mapping(entry, ep)
                _check_keys(entry, ep, {"scale", "probability"})
                for req in ("scale", "probability"):
                    if req not in entry:
                        raise ProblemFileError("missing required key", key=_join(ep, req))
                scales.append(_as_float(entry["scale"], _join(ep, "scale")))
                probs.append(_as_float(entry["probability"], _join(ep, "probability")))
            try:
                dist = EnsembleDistribution(scales=np.array(scales), probabilities=np.array(probs))
            except (ValidationError, DimensionMismatchError) as e:
                raise ProblemFileError(str(e), key=bp) from None
        else:
            for req in ("distribution", "half_width", "n_bins"):
                if req not in node:
                    raise ProblemFileError("missing required key", key=_join(path, req))
            kind = _as_str(node["distribution"], _join(path, "distribution"))
            half_width = _as_float(node["half_width"], _join(path, "half_width"))
            n_bins = _as_int(node["n_bins"], _join(path, "n_bins"))
            try:
                dist = standard_distribution(kind, half_width, n_bins)
            except (ValidationError, DimensionMismatchError) as e:
                raise ProblemFileError(str(e), key=path) from None
    resolved = {
        "bins": [
            {"scale": float(s), "probability": float(p)}
            for s, p in zip(dist.scales, dist.probabilities)
        ]
    }
    return dist, resolved


def _parse_penalty(node, path: str) -> tuple[PenaltyConfig, dict]:
    if node is None:
        penalty = PenaltyConfig()
    else:
        node = _mapping(node, path)
        _check_keys(node, path, {"soft_fraction", "weight"})
        kwargs = {}
        if "soft_fraction" in node:
            kwargs["soft_fraction"] = _as_float(node["soft_fraction"], _join(path, "soft_fraction"))
        if "weight" in node:
            kwargs["weight"] = _as_float(node["weight"], _join(path, "weight"))
        try:
            penalty = PenaltyConfig(**kwargs)
        except (ValidationError, DimensionMismatchError) as e:
            raise ProblemFileError(str(e), key=path) from None
    return penalty, {"soft_fraction": penalty.soft_fraction, "weight": penalty.weight}


def _parse_quantum_channels(node, path: str):
    entries = _as_list(node, path)
    channels = []
    resolved = []
    for i, entry in enumerate(entries):
        ep = f"{path}[{i}]"
        entry = _mapping(entry, ep)
        _check_keys(entry, ep, {"kraus", "insert_after_segment"})
        if "kraus" not in entry:
            raise ProblemFileError("missing required key", key=_join(ep, "kraus"))
        ops = [
            _decode_square(k, f"{ep}.kraus[{j}]")
            for j, k in enumerate(_as_list(entry["kraus"], _join(ep, "kraus")))
        ]
        slot = _as_int(entry.get("insert_after_segment", 0), _join(ep, "insert_after_segment"))
        try:
            ch = QuantumChannel(kraus_operators=tuple(ops), insert_after_segment=slot)
        except (ValidationError, DimensionMismatchError) as e:
            raise ProblemFileError(str(e), key=ep) from None
        channels.append(ch)
        resolved.append(
            {
                "kraus": [encode_matrix(k) for k in ch.kraus_operators],
                "insert_after_segment": ch.insert_after_segment,
            }
        )
    return tuple(channels), resolved


def _coerce_lists(value):
    if isinstance(value, list):
        return tuple(_coerce_lists(v) for v in value)
    return value


def _build_optimizer_config(cls, node: dict, path: str):
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in node.items():
        kp = _join(path, key)
        if key == "seed":
            raise ProblemFileError("set the top-level seed instead", key=kp)
        if key not in names:
            raise ProblemFileError("unrecognized key", key=kp)
        if cls is SagrapeConfig and key == "sa":
            kwargs[key] = _build_optimizer_config(SaConfig, _mapping(value, kp), kp)
        elif cls is SagrapeConfig and key == "grape":
            kwargs[key] = _build_optimizer_config(GrapeConfig, _mapping(value, kp), kp)
        else:
            kwargs[key] = _coerce_lists(value)
    try:
        return cls(**kwargs)
    except (ValidationError, DimensionMismatchError, TypeError) as e:
        raise ProblemFileError(str(e), key=path) from None


def _parse_optimizer(node, path: str, seed: int):
    node = _mapping(node, path)
    if "algorithm" not in node:
        raise ProblemFileError("missing required key", key=_join(path, "algorithm"))
    name = _as_str(node["algorithm"], _join(path, "algorithm"))
    if name not in OPTIMIZERS:
        raise ProblemFileError(
            f"unknown algorithm {name!r}; expected one of {sorted(OPTIMIZERS)}",
            key=_join(path, "algorithm"),
        )
    cls = OPTIMIZERS[name][0]
    body = {k: v for k, v in node.items() if k != "algorithm"}
    config = _build_optimizer_config(cls, body, path)
    if any(f.name == "seed" for f in dataclasses.fields(cls)):
        config = replace(config, seed=seed)
    return name, config


def _echo_optimizer(name: str, config) -> dict:
    def strip_seed(d: dict) -> dict:
        return {
            k: strip_seed(v) if isinstance(v, dict) else v for k, v in d.items() if k != "seed"
        }

    return {"algorithm": name, **strip_seed(dataclasses.asdict(config))}


def parse_problem_dict(doc: dict) -> LoadedProblem:
    """Validate a decoded problem document and resolve every default."""
    doc = _mapping(doc, "")
    _check_keys(
        doc,
        "",
        {"version", "seed", "system", "target", "ensemble", "penalty", "optimizer", "quantum_channels"},
    )
    version = _as_int(doc.get("version", FORMAT_VERSION), "version")
    if version != FORMAT_VERSION:
        raise ProblemFileError(f"unsupported version {version}; this build reads {FORMAT_VERSION}", key="version")
    seed = _as_int(doc.get("seed", 0), "seed")
    for req in ("system", "target", "optimizer"):
        if req not in doc:
            raise ProblemFileError("missing required key", key=req)
    system, system_doc = _parse_system(doc["system"], "system")
    target, target_doc = _parse_target(doc["target"], "target", system.dim)
    ensemble, ensemble_doc = _parse_ensemble(doc.get("ensemble"), "ensemble")
    penalty, penalty_doc = _parse_penalty(doc.get("penalty"), "penalty")
    if "quantum_channels" in doc:
        channels, channels_doc = _parse_quantum_channels(doc["quantum_channels"], "quantum_channels")
    else:
        channels, channels_doc = (), None
    algorithm, config = _parse_optimizer(doc["optimizer"], "optimizer", seed)
    try:
        problem = ControlProblem(
            system=system, target=target, ensemble=ensemble, penalty=penalty, channels=channels
        )
    except (ValidationError, DimensionMismatchError) as e:
        raise ProblemFileError(str(e)) from None
    document = {
        "version": FORMAT_VERSION,
        "seed": seed,
        "system": system_doc,
        "target": target_doc,
        "ensemble": ensemble_doc,
        "penalty": penalty_doc,
        "optimizer": _echo_optimizer(algorithm, config),
    }
    if channels_doc is not None:
        document["quantum_channels"] = channels_doc
    return LoadedProblem(
        problem=problem, algorithm=algorithm, config=config, seed=seed, document=document
    )


def parse_problem(path) -> LoadedProblem:
    """Read and validate a JSON problem file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ProblemFileError(f"cannot read {path}: {e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"JSON syntax error at line {e.lineno}, column {e.colno}: {e.msg}") from None
    return parse_problem_dict(doc)


def serialize_problem(loaded: LoadedProblem) -> dict:
    """Defaults-resolved document; parsing it again yields an equal problem."""
    return json.loads(json.dumps(loaded.document))


def with_overrides(
    loaded: LoadedProblem, seed: int | None = None, max_iterations: int | None = None
) -> LoadedProblem:
    """Apply CLI-level overrides, keeping the echo document in sync."""
    config = loaded.config
    document = json.loads(json.dumps(loaded.document))
    new_seed = loaded.seed
    if seed is not None:
        new_seed = seed
        document["seed"] = seed
        if any(f.name == "seed" for f in dataclasses.fields(type(config))):
            config = replace(config, seed=seed)
    if max_iterations is not None:
        if not any(f.name == "max_iterations" for f in dataclasses.fields(type(config))):
            raise ProblemFileError(
                f"algorithm {loaded.algorithm!r} has no max_iterations setting", key="optimizer"
            )
        config = replace(config, max_iterations=max_iterations)
        document["optimizer"]["max_iterations"] = max_iterations
    return LoadedProblem(
        problem=loaded.problem,
        algorithm=loaded.algorithm,
        config=config,
        seed=new_seed,
        document=document,
    )


def channel_labels(system: ControlSystem) -> list[str]:
    return [ch.label if ch.label else f"ch{m + 1}" for m, ch in enumerate(system.channels)]


def write_pulse(path, sequence: ControlSequence, labels=None, fidelity: float | None = None) -> None:
    """CSV with "#" metadata lines; 17 significant digits throughout."""
    if labels is None:
        labels = [f"ch{m + 1}" for m in range(sequence.n_channels)]
    if len(labels) != sequence.n_channels:
        raise ValidationError(f"{len(labels)} labels for {sequence.n_channels} channels")
    lines = [
        "# piecewise-constant control sequence",
        f"# total_time = {FLOAT_FORMAT % sequence.total_time}",
        f"# n_segments = {sequence.n_segments}",
    ]
    if fidelity is not None:
        lines.append(f"# fidelity = {FLOAT_FORMAT % fidelity}")
    lines.append("# units = durations:s amplitudes:rad/s")
    lines.append("segment,duration," + ",".join(labels))
    for n in range(sequence.n_segments):
        row = [str(n + 1), FLOAT_FORMAT % sequence.durations[n]]
        row += [FLOAT_FORMAT % a for a in sequence.amplitudes[n]]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pulse(path) -> tuple[ControlSequence, dict]:
    """Inverse of write_pulse: (sequence, metadata with parsed numbers)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ProblemFileError(f"cannot read {path}: {e}") from None
    metadata: dict = {}
    header = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                metadata[key.strip()] = value.strip()
            continue
        if header is None:
            header = line.split(",")
            if header[:2] != ["segment", "duration"]:
                raise ProblemFileError(f"line {lineno}: header must start with segment,duration")
            continue
        rows.append((lineno, line.split(",")))
    if header is None:
        raise ProblemFileError("pulse file has no header row")
    labels = header[2:]
    durations = np.zeros(len(rows))
    amplitudes = np.zeros((len(rows), len(labels)))
    for i, (lineno, cells) in enumerate(rows):
        if len(cells) != 2 + len(labels):
            raise ProblemFileError(
                f"line {lineno}: expected {2 + len(labels)} columns, got {len(cells)}"
            )
        try:
            index = int(cells[0])
            durations[i] = float(cells[1])
            amplitudes[i] = [float(c) for c in cells[2:]]
        except ValueError:
            raise ProblemFileError(f"line {lineno}: malformed number") from None
        if index != i + 1:
            raise ProblemFileError(f"line {lineno}: segment index {index}, expected {i + 1}")
    for key in ("total_time", "fidelity"):
        if key in metadata:
            try:
                metadata[key] = float(metadata[key])
            except ValueError:
                raise ProblemFileError(f"metadata {key} is not a number") from None
    if "n_segments" in metadata:
        try:
            metadata["n_segments"] = int(metadata["n_segments"])
        except ValueError:
            raise ProblemFileError("metadata n_segments is not an integer") from None
        if metadata["n_segments"] != len(rows):
            raise ProblemFileError(
                f"metadata says {metadata['n_segments']} segments but file has {len(rows)} rows"
            )
    metadata["labels"] = labels
    try:
        sequence = ControlSequence(durations, amplitudes)
    except (ValidationError, DimensionMismatchError) as e:
        raise ProblemFileError(str(e)) from None
    return sequence, metadata


def write_trace(path, result: OptimizationResult) -> None:
    lines = ["iteration,phi,fbar"]
    for i, (phi, fbar) in enumerate(zip(result.objective_trace, result.fidelity_trace)):
        lines.append(f"{i},{FLOAT_FORMAT % phi},{FLOAT_FORMAT % fbar}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_profile(path, problem: ControlProblem, result: OptimizationResult) -> None:
    lines = ["scale,probability,fidelity"]
    dist = problem.ensemble
    for s, p, f in zip(dist.scales, dist.probabilities, result.per_bin_profile):
        lines.append(f"{FLOAT_FORMAT % s},{FLOAT_FORMAT % p},{FLOAT_FORMAT % f}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_manifest(path, loaded: LoadedProblem, result: OptimizationResult) -> None:
    manifest = {
        "version": FORMAT_VERSION,
        "algorithm": loaded.algorithm,
        "seed": loaded.seed,
        "config": _echo_optimizer(loaded.algorithm, loaded.config),
        "termination": result.termination,
        "iterations_used": result.iterations_used,
        "wall_time": result.wall_time,
        "final_fidelity": result.final_fidelity,
        "final_objective": result.final_objective,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def run_problem(loaded: LoadedProblem, out_dir) -> tuple[OptimizationResult, int]:
    """Run the configured algorithm and emit pulse/trace/profile/manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = OPTIMIZERS[loaded.algorithm][1]
    result = runner(loaded.problem, loaded.config)
    write_pulse(
        out / "pulse.csv",
        result.sequence,
        labels=channel_labels(loaded.problem.system),
        fidelity=result.final_fidelity,
    )
    write_trace(out / "trace.csv", result)
    write_profile(out / "profile.csv", loaded.problem, result)
    write_manifest(out / "manifest.json", loaded, result)
    return result, EXIT_CODES[result.termination]


def evaluate_pulse(problem: ControlProblem, sequence: ControlSequence) -> dict:
    """Mean/per-bin fidelity and penalty of a sequence under a problem."""
    if sequence.n_channels != problem.system.n_channels:
        raise DimensionMismatchError(
            f"pulse drives {sequence.n_channels} channels but the system has "
            f"{problem.system.n_channels}"
        )
    perf = ensemble_performance(problem, sequence)
    pen = penalty_value(sequence, problem.system, problem.penalty)
    return {
        "fbar": perf.mean,
        "per_bin": perf.per_bin,
        "scales": problem.ensemble.scales,
        "probabilities": problem.ensemble.probabilities,
        "penalty": pen,
        "phi": perf.mean - pen,
    }
