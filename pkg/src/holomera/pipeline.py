"""Configuration-driven pipeline: prepare, build, optimize, compile, simulate, analyze.

Every artifact is written next to a ``*.manifest.json`` recording a key (hash
of the parameters and upstream digests) and a content digest of the files.
A stage is skipped when its key matches and its files still hash to the
recorded digest, so re-running an unchanged config recomputes nothing.

Directory layout::

    reference/mps.{npz,json}  reference/correlations.json
    networks/<net>/split.{npz,json}  networks/<net>/optimized.{npz,json}  networks/<net>/trace.csv
    circuits/<net>.circuit.json  [circuits/<net>.qasm]
    exact/<net>.json  shots/<net>__<noise>.npz
    tables/<net>__<noise>.csv  reports/<net>__<noise>.json
    plot.json  summary.json  summary.csv
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import CorrelationTable, compare, estimate_correlations, write_plot_data
from .circuit import (
    Cnot,
    GateCircuit,
    Rotation,
    TwoQubitUnitary,
    compile_network,
    free_angle_count,
    from_native,
    to_native,
    to_qasm3,
)
from .config import RunConfig
from .models import SpinChainModel, build_hamiltonian_mpo, exact_ground_state, MAX_ED_LENGTH
from .mps import DmrgConvergenceError, dmrg_ground_state, load_mps, mps_observables, save_mps, truncate
from .network import (
    build_network,
    collapse_to_mps,
    load_network,
    network_overlap,
    save_network,
)
from .optimize import optimize_multistart
from .simulator import MAX_DENSITY_QUBITS, NoiseModel, ShotRecord, lower, run_exact, sample_shots

log = logging.getLogger(__name__)

STAGES = ("prepare", "build", "optimize", "compile", "simulate", "analyze")


class StageError(RuntimeError):
    """A stage failed; ``stage`` names it and ``cause`` holds the original exception."""

    def __init__(self, stage: str, item: str, cause: BaseException):
        where = f"{stage}[{item}]" if item else stage
        super().__init__(f"stage {where} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.item = item
        self.cause = cause


# ----------------------------------------------------------------------------
# hashing and manifests


def _key(payload) -> str:
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def file_digest(path: Path) -> str:
    """Content hash; ``.npz`` archives are hashed by array content, not zip bytes."""
    h = hashlib.sha256()
    if path.suffix == ".npz":
        with np.load(path) as data:
            for name in sorted(data.files):
                arr = np.ascontiguousarray(data[name])
                h.update(f"{name}:{arr.dtype.str}:{arr.shape}".encode())
                h.update(arr.tobytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


def digest(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(p.name.encode())
        h.update(file_digest(p).encode())
    return h.hexdigest()


def manifest_path(output: Path) -> Path:
    return output.with_name(output.name + ".manifest.json")


def _write(path: Path, data: bytes | str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data.encode() if isinstance(data, str) else data)
    tmp.replace(path)


@dataclass
class StageEvent:
    stage: str
    item: str
    computed: bool
    digest: str
    seconds: float = 0.0


@dataclass
class PipelineResult:
    root: Path
    events: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def computed(self, stage: str | None = None) -> list:
        return [e for e in self.events if e.computed and (stage is None or e.stage == stage)]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _noise_seed(seed: int, name: str) -> int:
    return (int(seed) + zlib.crc32(name.encode())) % (1 << 63)


def save_shots(record: ShotRecord, path: Path) -> None:
    buf = io.BytesIO()
    np.savez(buf, values=record.values, seed=np.int64(record.seed),
             noise=np.array([record.noise.p1, record.noise.p2]), basis=np.array(record.basis))
    _write(path, buf.getvalue())


def load_shots(path: Path) -> ShotRecord:
    with np.load(path) as d:
        p1, p2 = (float(v) for v in d["noise"])
        return ShotRecord(d["values"].copy(), int(d["seed"]), NoiseModel(p1, p2), "stored", str(d["basis"]))


def circuit_counts(circ: GateCircuit) -> dict:
    low = lower(circ, NoiseModel())
    n1, n2 = low.noisy_gate_counts()
    return {
        "qubits": circ.n_qubits,
        "two_qubit_unitaries": circ.count(TwoQubitUnitary),
        "cnots": circ.count(Cnot),
        "rotations": circ.count(Rotation),
        "free_angles": free_angle_count(circ) if circ.is_decomposed else None,
        "one_qubit_layers": n1,
        "two_qubit_layers": n2,
    }


# ----------------------------------------------------------------------------
# pipeline


class Pipeline:
    def __init__(self, cfg: RunConfig, root: str | Path | None = None, force: bool = False):
        self.cfg = cfg
        self.root = Path(root) if root is not None else cfg.output_dir()
        self.force = force
        self.events: list[StageEvent] = []
        self._cache: dict = {}

    # -- caching ------------------------------------------------------------

    def _cached(self, stage, item, outputs, params, compute):
        """Run ``compute()`` unless the manifest beside ``outputs[0]`` matches ``params``."""
        outputs = [self.root / o for o in outputs]
        mpath = manifest_path(outputs[0])
        key = _key({"stage": stage, "item": item, "version": __version__, "params": params})
        if not self.force and mpath.exists() and all(p.exists() for p in outputs):
            try:
                man = json.loads(mpath.read_text())
                if man.get("key") == key and man.get("digest") == digest(outputs):
                    self.events.append(StageEvent(stage, item, False, man["digest"]))
                    log.info("%s %s: up to date", stage, item)
                    return man
            except (ValueError, OSError):
                pass
        t0 = time.perf_counter()
        for p in outputs:
            p.parent.mkdir(parents=True, exist_ok=True)
        try:
            extra = compute(outputs) or {}
        except (KeyboardInterrupt, StageError):
            raise
        except Exception as exc:
            raise StageError(stage, item, exc) from exc
        dt = time.perf_counter() - t0
        dg = digest(outputs)
        man = {"stage": stage, "item": item, "key": key, "digest": dg, "params": params,
               "outputs": [p.name for p in outputs], "seconds": round(dt, 3), **_jsonable(extra)}
        _write(mpath, json.dumps(man, indent=1, sort_keys=True))
        self.events.append(StageEvent(stage, item, True, dg, dt))
        log.info("%s %s: done in %.1f s", stage, item, dt)
        return man

    # -- stages -------------------------------------------------------------

    def prepare(self) -> dict:
        c = self.cfg
        params = {"model": vars(c.model), "dmrg": vars(c.dmrg), "anchor": c.anchor, "basis": c.sampling.basis}

        def compute(out):
            model = SpinChainModel(c.model.length, c.model.coupling)
            res = dmrg_ground_state(build_hamiltonian_mpo(model), chi_max=c.dmrg.chi_max,
                                    sweeps=c.dmrg.sweeps, seed=c.dmrg.seed, cutoff=c.dmrg.cutoff,
                                    tol=c.dmrg.tol, raise_on_failure=c.dmrg.strict)
            if not res.converged:
                log.warning("DMRG did not meet its tolerance in %d sweeps", c.dmrg.sweeps)
            extra = {"energy": res.energy, "chi": res.mps.chi, "converged": res.converged,
                     "sweep_energies": res.sweep_energies}
            if c.model.length <= MAX_ED_LENGTH:
                extra["ed_energy"] = exact_ground_state(model)[0]
            save_mps(res.mps, out[0], {"energy": res.energy})
            onsite, conn = mps_observables(res.mps, c.anchor, c.sampling.basis)
            _write(out[2], json.dumps({"anchor": c.anchor, "basis": c.sampling.basis,
                                       "onsite": onsite.tolist(), "connected": conn.tolist()}, indent=1))
            return extra

        man = self._cached("prepare", "", ["reference/mps.npz", "reference/mps.json",
                                           "reference/correlations.json"], params, compute)
        self._cache["reference_digest"] = man["digest"]
        return man

    def reference(self, chi: int | None = None):
        if "reference" not in self._cache:
            self._cache["reference"] = load_mps(self.root / "reference/mps.npz")[0]
        ref = self._cache["reference"]
        if chi is None or chi >= ref.chi:
            return ref
        k = ("reference", chi)
        if k not in self._cache:
            self._cache[k] = truncate(ref, chi)[0]
        return self._cache[k]

    def build(self, net) -> dict:
        c = self.cfg
        params = {"kind": net.kind, "depth": net.depth, "build": vars(c.build),
                  "upstream": self._cache["reference_digest"]}

        def compute(out):
            ref = self.reference(c.build.chi_ref)
            built = build_network(net.kind, net.depth, ref, disentangler_iters=c.build.disentangler_iters)
            save_network(built, out[0])
            return {"split_fidelity": built.fidelity_log.get("split_fidelity")}

        return self._cached("build", net.name, [f"networks/{net.name}/split.npz",
                                                f"networks/{net.name}/split.json"], params, compute)

    def optimize(self, net, upstream: str) -> dict:
        c = self.cfg
        params = {"optimize": vars(c.optimize), "upstream": upstream}

        def compute(out):
            start = load_network(self.root / f"networks/{net.name}/split.json")
            ref = self.reference(c.optimize.chi_ref)
            best, trace, finals = optimize_multistart(
                start, ref, c.optimize.restarts, c.optimize.seed + zlib.crc32(net.name.encode()),
                c.optimize.max_cycles, c.optimize.rel_tol)
            full = self.reference()
            best.fidelity_log["reference_fidelity"] = abs(network_overlap(best, full)) ** 2
            save_network(best, out[0])
            trace.to_csv(out[2], timing=False)
            return {"cycles": trace.cycles, "monotone": trace.is_monotone(), "start": best.fidelity_log["start"],
                    "start_fidelities": finals,
                    "optimized_fidelity": best.fidelity_log["optimized_fidelity"],
                    "reference_fidelity": best.fidelity_log["reference_fidelity"]}

        return self._cached("optimize", net.name, [f"networks/{net.name}/optimized.npz",
                                                   f"networks/{net.name}/optimized.json",
                                                   f"networks/{net.name}/trace.csv"], params, compute)

    def compile(self, net, upstream: str) -> dict:
        c = self.cfg
        want_qasm = "qasm3" in c.output.formats and c.compile.decompose
        outs = [f"circuits/{net.name}.circuit.json"] + ([f"circuits/{net.name}.qasm"] if want_qasm else [])
        params = {"compile": vars(c.compile), "basis": c.sampling.basis, "qasm": want_qasm, "upstream": upstream}

        def compute(out):
            src = load_network(self.root / f"networks/{net.name}/optimized.json")
            circ = compile_network(src, c.sampling.basis, c.compile.decompose, c.compile.gauge_reduce,
                                   c.compile.seed)
            circ.meta.update({"network": net.name, "fidelity_log": _jsonable(src.fidelity_log)})
            _write(out[0], to_native(circ))
            if want_qasm:
                _write(out[1], to_qasm3(circ))
            return {"counts": circuit_counts(circ), "gates": len(src.gates)}

        return self._cached("compile", net.name, outs, params, compute)

    def _circuit(self, net) -> GateCircuit:
        return from_native((self.root / f"circuits/{net.name}.circuit.json").read_bytes())

    def exact(self, net, upstream: str) -> dict:
        anchor = self.cfg.anchor

        def compute(out):
            circ = self._circuit(net)
            if circ.n_qubits <= MAX_DENSITY_QUBITS:
                res = run_exact(circ, anchors=[anchor - 1])
                onsite, conn, method = res.onsite, res.connected(anchor - 1), "density"
            else:
                mps = collapse_to_mps(load_network(self.root / f"networks/{net.name}/optimized.json"))
                onsite, conn = mps_observables(mps, anchor, self.cfg.sampling.basis)
                method = "contraction"
            _write(out[0], json.dumps({"anchor": anchor, "method": method, "onsite": onsite.tolist(),
                                       "connected": conn.tolist()}, indent=1))
            return {"method": method}

        return self._cached("simulate", f"{net.name}:exact", [f"exact/{net.name}.json"],
                            {"anchor": anchor, "upstream": upstream}, compute)

    def shots(self, net, level, upstream: str) -> dict:
        c = self.cfg
        n_shots = net.n_shots if net.n_shots is not None else c.sampling.n_shots
        name = f"{net.name}__{level.name}"
        seed = _noise_seed(c.sampling.seed, name)
        p1, p2 = level.resolved()
        params = {"n_shots": n_shots, "seed": seed, "p1": p1, "p2": p2, "upstream": upstream}

        def compute(out):
            rec = sample_shots(self._circuit(net), NoiseModel(p1, p2), n_shots, seed, c.sampling.backend)
            save_shots(rec, out[0])
            return {"n_shots": n_shots, "backend": rec.backend}

        return self._cached("simulate", name, [f"shots/{name}.npz"], params, compute)

    def analyze(self, net, level, shot_digest: str, exact_digest: str) -> dict:
        c = self.cfg
        name = f"{net.name}__{level.name}"
        params = {"anchor": c.anchor, "windows": c.analysis.windows, "upstream": [shot_digest, exact_digest,
                                                                                    self._cache["reference_digest"]]}

        def compute(out):
            rec = load_shots(self.root / f"shots/{name}.npz")
            table = estimate_correlations(rec, c.anchor, label=name)
            exact = json.loads((self.root / f"exact/{net.name}.json").read_text())
            ref = json.loads((self.root / "reference/correlations.json").read_text())
            windows = [w for w in c.analysis.windows if w <= len(table.distances)] or [len(table.distances)]
            vs_exact = compare(table, exact["connected"], windows)
            vs_ref = compare(table, ref["connected"], windows)
            exact_vs_ref = np.abs(np.subtract(exact["connected"], ref["connected"]))
            _write(out[0], table.to_csv())
            report = {
                "network": net.name, "noise": level.name, "n_shots": table.n_shots,
                "vs_exact": vs_exact.to_dict(), "vs_reference": vs_ref.to_dict(),
                "exact_vs_reference_window_max": {str(w): float(exact_vs_ref[:w].max()) for w in windows},
                "max_abs_z_vs_exact": float(np.max(np.abs(vs_exact.z_scores))),
            }
            _write(out[1], json.dumps(report, indent=1))
            return {}

        return self._cached("analyze", name, [f"tables/{name}.csv", f"reports/{name}.json"], params, compute)

    # -- driver -------------------------------------------------------------

    def run(self, until: str = "analyze") -> PipelineResult:
        if until not in STAGES:
            raise ValueError(f"unknown stage {until!r}")
        stop = STAGES.index(until)
        self.root.mkdir(parents=True, exist_ok=True)
        _write(self.root / "config.json", json.dumps(_jsonable(self.cfg.to_dict()), indent=1, sort_keys=True))
        self.prepare()
        for net in self.cfg.networks:
            if stop < 1:
                break
            d = self.build(net)["digest"]
            if stop < 2:
                continue
            d = self.optimize(net, d)["digest"]
            if stop < 3:
                continue
            d = self.compile(net, d)["digest"]
            if stop < 4:
                continue
            exact_digest = self.exact(net, d)["digest"]
            for level in self.cfg.noise:
                sd = self.shots(net, level, d)["digest"]
                if stop >= 5:
                    self.analyze(net, level, sd, exact_digest)
        result = PipelineResult(self.root, list(self.events))
        if stop >= 5:
            result.summary = self.write_summary()
        return result

    def _manifest(self, output: str) -> dict:
        return json.loads(manifest_path(self.root / output).read_text())

    def write_summary(self) -> dict:
        rows, tables = [], []
        ref = json.loads((self.root / "reference/correlations.json").read_text())
        prep = self._manifest("reference/mps.npz")
        for net in self.cfg.networks:
            opt = self._manifest(f"networks/{net.name}/optimized.npz")
            comp = self._manifest(f"circuits/{net.name}.circuit.json")
            for level in self.cfg.noise:
                name = f"{net.name}__{level.name}"
                rep = json.loads((self.root / f"reports/{name}.json").read_text())
                rows.append({
                    "network": net.name, "noise": level.name, "n_shots": rep["n_shots"],
                    "gates": comp["gates"], "qubits": comp["counts"]["qubits"],
                    "optimized_fidelity": opt["optimized_fidelity"],
                    "reference_fidelity": opt["reference_fidelity"],
                    "max_error_vs_exact": rep["vs_exact"]["max_error"],
                    "max_error_vs_reference": rep["vs_reference"]["max_error"],
                    "max_abs_z_vs_exact": rep["max_abs_z_vs_exact"],
                    "window_max_vs_exact": rep["vs_exact"]["window_max"],
                    "exact_vs_reference_window_max": rep["exact_vs_reference_window_max"],
                })
                tables.append(_table_from_csv(self.root / f"tables/{name}.csv", self.cfg.anchor,
                                              self.cfg.sampling.basis, name))
        summary = {"reference_energy": prep["energy"], "anchor": self.cfg.anchor, "rows": rows}
        _write(self.root / "summary.json", json.dumps(summary, indent=1))
        buf = io.StringIO()
        cols = ["network", "noise", "n_shots", "gates", "qubits", "optimized_fidelity", "reference_fidelity",
                "max_error_vs_exact", "max_error_vs_reference", "max_abs_z_vs_exact"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in cols])
        _write(self.root / "summary.csv", buf.getvalue())
        refs = {"reference": ref["connected"]}
        for net in self.cfg.networks:
            refs[f"{net.name} exact"] = json.loads((self.root / f"exact/{net.name}.json").read_text())["connected"]
        _write(self.root / "plot.json", write_plot_data(tables, refs))
        return summary


def _table_from_csv(path: Path, anchor: int, basis: str, label: str) -> CorrelationTable:
    onsite, onsite_err, dist, conn, err = [], [], [], [], []
    n = 0
    with path.open() as fh:
        for row in csv.DictReader(fh):
            n = int(row["n_shots"])
            if row["kind"] == "onsite":
                onsite.append(float(row["mean"]))
                onsite_err.append(float(row["stderr"]))
            else:
                dist.append(int(row["index"]))
                conn.append(float(row["mean"]))
                err.append(float(row["stderr"]))
    return CorrelationTable(anchor, basis, n, np.array(dist), np.array(conn), np.array(err),
                            np.array(onsite), np.array(onsite_err), label)


def run_pipeline(cfg: RunConfig, root=None, until: str = "analyze", force: bool = False) -> PipelineResult:
    return Pipeline(cfg, root, force).run(until)


__all__ = ["Pipeline", "PipelineResult", "StageError", "STAGES", "run_pipeline", "DmrgConvergenceError",
           "load_shots", "save_shots", "digest"]
