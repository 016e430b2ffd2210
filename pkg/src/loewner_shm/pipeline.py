"""Declarative runs: simulate -> FRF -> identify -> indices, with a manifest.

Output layout under the run directory::

    <case>/ts_<input>/          time-series containers (simulated cases)
    <case>/frf/                 FRF container (simulated cases)
    <case>/diagram.csv|json     stabilization diagram
    <case>/modes.json           consolidated ModalSet
    reports/<case>.json         DamageReport per non-baseline case
    reports/combined.csv
    manifest.json               written last
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from . import __version__
from .beam import BeamConfig, DamageScenario, StepInput, assemble, simulate_step_response
from .containers import read_frf, write_frf, write_time_series
from .errors import ArtifactError, ConfigError, LoewnerShmError
from .frf import Direction, estimate_frf, select_band, split_run
from .indices import combined_csv, damage_report
from .loewner import DEFAULT_MAX_BINS, MIN_DAMPING
from .modes import ModalSet
from .serialization import dump_json, write_text
from .stabilization import Tolerances, consolidate, sweep

DEFAULT_WORKERS = 4


@dataclass(frozen=True)
class SimulationSettings:
    fs: float = 16384.0
    duration: float = 4.0
    input_node: int = 1
    amplitude: float = 1.0
    # stored FRF band; identification may narrow it further
    frf_band: tuple[float, float] = (1.0, 4000.0)

    @classmethod
    def from_dict(cls, d: Mapping) -> "SimulationSettings":
        unknown = set(d) - {"fs", "duration", "input_node", "amplitude", "frf_band"}
        if unknown:
            raise ConfigError(f"unknown simulation keys {sorted(unknown)}")
        d = dict(d)
        if "frf_band" in d:
            d["frf_band"] = tuple(float(x) for x in d["frf_band"])
        return cls(**d)


@dataclass(frozen=True)
class IdentificationSettings:
    orders: tuple[int, ...] = tuple(range(24, 51, 2))
    seed: int = 0
    band: tuple[float, float] = (1.0, 4000.0)
    tolerances: Tolerances = field(default_factory=Tolerances)
    min_streak: int = 3
    max_bins: int | None = DEFAULT_MAX_BINS
    min_damping: float = MIN_DAMPING

    @classmethod
    def from_dict(cls, d: Mapping) -> "IdentificationSettings":
        unknown = set(d) - {"orders", "seed", "band", "tolerances", "min_streak", "max_bins", "min_damping"}
        if unknown:
            raise ConfigError(f"unknown identification keys {sorted(unknown)}")
        kw = {}
        if "orders" in d:
            o = d["orders"]
            if isinstance(o, Mapping):
                kw["orders"] = tuple(range(int(o["start"]), int(o["stop"]) + 1, int(o.get("step", 2))))
            else:
                kw["orders"] = tuple(int(k) for k in o)
        if "seed" in d:
            kw["seed"] = int(d["seed"])
        if "band" in d:
            kw["band"] = (float(d["band"][0]), float(d["band"][1]))
        if "tolerances" in d:
            kw["tolerances"] = Tolerances(**d["tolerances"])
        for key in ("min_streak", "max_bins"):
            if key in d:
                kw[key] = None if d[key] is None else int(d[key])
        if "min_damping" in d:
            kw["min_damping"] = float(d["min_damping"])
        return cls(**kw)


@dataclass(frozen=True)
class ScenarioSource:
    """Either a simulated damage scenario or an external FRF container path."""

    scenario: DamageScenario | None = None
    frf_path: Path | None = None

    @property
    def external(self) -> bool:
        return self.frf_path is not None


@dataclass(frozen=True)
class RunConfig:
    scenarios: dict[str, ScenarioSource]
    baseline: str = "case1"
    beam: BeamConfig = field(default_factory=BeamConfig)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    identification: IdentificationSettings = field(default_factory=IdentificationSettings)
    f_gate_rel: float = 0.20
    outputs: Path | None = None
    workers: int = DEFAULT_WORKERS
    # sha256 of the config bytes plus any command-line overrides
    config_hash: str = ""

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("scenario map is empty")
        if self.baseline not in self.scenarios:
            raise ConfigError(f"baseline case {self.baseline!r} is not among the scenarios")
        kinds = {src.external for src in self.scenarios.values()}
        if len(kinds) > 1:
            raise ConfigError("scenarios mix simulated and external FRF sources")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def simulated(self) -> bool:
        return not next(iter(self.scenarios.values())).external

    @property
    def case_ids(self) -> list[str]:
        return list(self.scenarios)


_TOP_KEYS = {"beam", "simulation", "scenarios", "baseline", "identification", "indices", "outputs", "workers"}


def parse_config(text: str, base_dir: str | os.PathLike = ".", overrides: Mapping | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from JSON text.

    Relative paths (external FRFs, outputs) resolve against ``base_dir``.
    ``overrides`` may set ``seed`` and ``outputs``.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    base = Path(base_dir)

    scenarios: dict[str, ScenarioSource] = {}
    for cid, spec in (raw.get("scenarios") or {}).items():
        if not isinstance(spec, dict):
            raise ConfigError(f"{cid}: scenario must be an object")
        if "frf" in spec:
            if len(spec) != 1:
                raise ConfigError(f"{cid}: an external scenario carries only an 'frf' path")
            scenarios[cid] = ScenarioSource(frf_path=base / spec["frf"])
        else:
            try:
                scenarios[cid] = ScenarioSource(scenario=DamageScenario.from_dict(spec))
            except (ConfigError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{cid}: invalid scenario: {exc}") from None

    ident = IdentificationSettings.from_dict(raw.get("identification", {}))
    if "seed" in overrides:
        ident = IdentificationSettings(**{**ident.__dict__, "seed": int(overrides["seed"])})
    indices = raw.get("indices", {})
    if set(indices) - {"f_gate_rel"}:
        raise ConfigError(f"unknown indices keys {sorted(set(indices) - {'f_gate_rel'})}")
    out = overrides.get("outputs", raw.get("outputs"))
    # the output location does not affect results, so only the seed override enters the hash
    digest = hashlib.sha256(text.encode("utf-8"))
    if "seed" in overrides:
        digest.update(f"\nseed={int(overrides['seed'])}".encode("utf-8"))
    return RunConfig(
        scenarios=scenarios,
        baseline=raw.get("baseline", "case1"),
        beam=BeamConfig.from_dict(raw["beam"]) if "beam" in raw else BeamConfig(),
        simulation=SimulationSettings.from_dict(raw.get("simulation", {})),
        identification=ident,
        f_gate_rel=float(indices.get("f_gate_rel", 0.20)),
        outputs=None if out is None else base / out,
        workers=int(raw.get("workers", DEFAULT_WORKERS)),
        config_hash=digest.hexdigest(),
    )


def load_config(path: str | os.PathLike, overrides: Mapping | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    # outputs given on the command line are relative to the working directory
    overrides = dict(overrides or {})
    if overrides.get("outputs") is not None:
        overrides["outputs"] = os.path.abspath(overrides["outputs"])
    return parse_config(text, path.parent, overrides)


def _out_dir(config: RunConfig) -> Path:
    if config.outputs is None:
        raise ConfigError("no output directory: set 'outputs' in the config or pass --out")
    return Path(config.outputs)


def _case_error(case_id: str, exc: Exception) -> Exception:
    exc.case_id = case_id
    return exc


def _map_cases(config: RunConfig, fn: Callable[[str], object], cases: list[str]) -> dict[str, object]:
    """Run ``fn`` per case on a bounded pool; the first failure (in case order) is raised."""
    with ThreadPoolExecutor(max_workers=min(config.workers, max(1, len(cases)))) as pool:
        futures = {cid: pool.submit(fn, cid) for cid in cases}
    results = {}
    for cid in cases:
        exc = futures[cid].exception()
        if exc is not None:
            raise _case_error(cid, exc)
        results[cid] = futures[cid].result()
    return results


def _frf_path(config: RunConfig, case_id: str) -> Path:
    src = config.scenarios[case_id]
    return src.frf_path if src.external else _out_dir(config) / case_id / "frf"


def simulate_case(config: RunConfig, case_id: str) -> dict[str, Path]:
    """Simulate the y and z step runs of one case and write its containers."""
    src = config.scenarios[case_id]
    if src.external:
        return {}
    sim = config.simulation
    system = assemble(config.beam, src.scenario)
    case_dir = _out_dir(config) / case_id
    written = {}
    stims, resps = [], []
    for direction in (Direction.Y, Direction.Z):
        run = simulate_step_response(system, StepInput(sim.input_node, direction, sim.amplitude), sim.fs, sim.duration)
        name = f"ts_{direction.value}"
        written[name] = write_time_series(run, case_dir / name)
        st, rs = split_run(run)
        stims.append(st)
        resps.append(rs)
    frf = estimate_frf(stims, resps, increments=True)
    frf = select_band(frf, *sim.frf_band)
    written["frf"] = write_frf(frf, case_dir / "frf")
    return written


def identify_case(config: RunConfig, case_id: str) -> dict[str, Path]:
    path = _frf_path(config, case_id)
    try:
        frf = read_frf(path)
    except FileNotFoundError as exc:
        raise ArtifactError(f"{case_id}: FRF artifact not found ({exc})") from None
    ident = config.identification
    diagram = sweep(
        frf,
        ident.orders,
        seed=ident.seed,
        band=ident.band,
        tolerances=ident.tolerances,
        max_bins=ident.max_bins,
        min_damping=ident.min_damping,
    )
    modes = consolidate(diagram, ident.min_streak)
    case_dir = _out_dir(config) / case_id
    case_dir.mkdir(parents=True, exist_ok=True)
    out = {"diagram_csv": case_dir / "diagram.csv", "diagram_json": case_dir / "diagram.json", "modes": case_dir / "modes.json"}
    write_text(out["diagram_csv"], diagram.to_csv())
    write_text(out["diagram_json"], diagram.to_json())
    write_text(out["modes"], modes.to_json())
    return out


def _read_modes(config: RunConfig, case_id: str) -> ModalSet:
    path = _out_dir(config) / case_id / "modes.json"
    if not path.is_file():
        raise _case_error(case_id, ArtifactError(f"{case_id}: modal set not found at {path}"))
    return ModalSet.from_json(path.read_text(encoding="utf-8"))


def cmd_simulate(config: RunConfig) -> dict[str, dict[str, Path]]:
    if not config.simulated:
        raise ConfigError("no simulated scenarios in this config")
    return _map_cases(config, lambda cid: simulate_case(config, cid), config.case_ids)


def cmd_identify(config: RunConfig) -> dict[str, dict[str, Path]]:
    return _map_cases(config, lambda cid: identify_case(config, cid), config.case_ids)


def cmd_indices(config: RunConfig) -> dict[str, Path]:
    """One DamageReport per non-baseline case against the baseline, plus the combined table."""
    base = _read_modes(config, config.baseline)
    others = [c for c in config.case_ids if c != config.baseline]

    def one(cid: str):
        return damage_report(cid, base, _read_modes(config, cid), config.f_gate_rel)

    reports = _map_cases(config, one, others)
    rdir = _out_dir(config) / "reports"
    rdir.mkdir(parents=True, exist_ok=True)
    out = {}
    for cid in others:
        out[cid] = rdir / f"{cid}.json"
        write_text(out[cid], reports[cid].to_json())
    out["combined"] = rdir / "combined.csv"
    write_text(out["combined"], combined_csv([reports[c] for c in others]))
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _artifact_entry(root: Path, path: Path) -> dict:
    """Relative path and digest; container directories hash each member."""
    rel = path.relative_to(root).as_posix() if path.is_relative_to(root) else str(path)
    if path.is_dir():
        return {"path": rel, "members": {p.name: _sha256(p) for p in sorted(path.iterdir()) if p.is_file()}}
    return {"path": rel, "sha256": _sha256(path)}


def cmd_full_run(config: RunConfig) -> dict:
    """Simulate (if configured), identify and compute indices; the manifest is written last."""
    root = _out_dir(config)
    timings = {}
    artifacts: dict[str, dict] = {cid: {} for cid in config.case_ids}
    if config.simulated:
        t0 = time.perf_counter()
        for cid, files in cmd_simulate(config).items():
            artifacts[cid].update(files)
        timings["simulate_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    for cid, files in cmd_identify(config).items():
        artifacts[cid].update(files)
    timings["identify_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    reports = cmd_indices(config)
    timings["indices_s"] = time.perf_counter() - t0

    manifest = {
        "tool": "loewner-shm",
        "version": __version__,
        "config_sha256": config.config_hash,
        "baseline": config.baseline,
        "cases": {
            cid: {name: _artifact_entry(root, p) for name, p in sorted(files.items())} for cid, files in artifacts.items()
        },
        "reports": {name: _artifact_entry(root, p) for name, p in reports.items()},
        "timings": timings,
    }
    write_text(root / "manifest.json", dump_json(manifest))
    return manifest


def error_payload(exc: BaseException) -> dict:
    d = {"error": type(exc).__name__, "message": str(exc)}
    case = getattr(exc, "case_id", None)
    if case is not None:
        d["case"] = case
    if isinstance(exc, LoewnerShmError):
        d["category"] = "loewner-shm"
    return d


def preset_config_path() -> Path:
    """Shipped config reproducing the five-case beam benchmark."""
    return Path(__file__).parent / "data" / "paper_beam.json"
