"""Scenario configuration, run persistence and the ``landau-eps`` command line.

A run directory holds one subdirectory per subcommand (``penrose/``,
``evolve/``, ``verify/``, ``report/``).  Every numeric file starts with a
comment (or a ``config_hash`` key) carrying the hash of the validated
configuration, and every subdirectory gets a ``record.json`` describing the
run.  Apart from the timing fields of ``record.json``, two runs of the same
configuration write byte-identical files.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .acceptance import CRITERIA, relative_deviation, run_criteria
from .analysis import envelope_sup, fit_algebraic_decay, weight_fn, write_csv, write_json
from .dispersion import CertificateError, penrose_margin
from .foundations import FiniteSobolevTail, GaussianHermite, Model, PhysicalParams
from .kernels import KernelSpec
from .kinetic import VelocityGrid, run_scenario
from .volterra import TimeGrid, density_mode, density_norm

log = logging.getLogger("landau_eps")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_VERIFY = 3


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PhysicsConfig(_Strict):
    d: int = 1
    model: Model = Model.LINEAR_BOLTZMANN
    epsilon: float = Field(0.0, ge=0)
    e0: float = Field(1.0, gt=0)
    ell: float = 1.0
    n: int = Field(4, ge=3)


Amplitude = Union[float, Tuple[float, float]]


class InitialDataConfig(_Strict):
    kind: Literal["gaussian_hermite", "finite_sobolev_tail"] = "gaussian_hermite"
    amplitudes: Dict[int, Amplitude] = {1: 1.0, -1: 1.0}
    poly: List[float] = [1.0]
    width: float = Field(0.5, gt=0)
    zero_mode_poly: List[float] = [0.0, 1.0]
    n_decl: int = Field(4, ge=0)
    window_radius: float = Field(1.0, gt=0)


class TimeConfig(_Strict):
    t_end: float = Field(40.0, gt=0)
    dt: float = Field(0.01, gt=0)

    @model_validator(mode="after")
    def _steps(self):
        n = self.t_end / self.dt
        if n < 2 or abs(n - round(n)) > 1e-9 * n:
            raise ValueError("t_end must be a multiple of dt with at least 2 steps")
        return self


class VelocityConfig(_Strict):
    dxi: float = Field(0.05, gt=0)
    extent: float = Field(60.0, gt=0)


class PenroseConfig(_Strict):
    models: List[Model] = [Model.LINEAR_BOLTZMANN, Model.FOKKER_PLANCK]
    epsilons: List[float] = [0.0, 0.02, 0.05, 0.1]
    Lambda: float = Field(40.0, gt=0)
    Z: float = Field(20.0, gt=0)
    k_max: float = Field(8.0, ge=1)
    n_lambda: int = Field(161, ge=3)
    n_zeta: int = Field(81, ge=3)
    kappa_target: float = 0.05
    zero_kernel: bool = False

    @field_validator("epsilons")
    @classmethod
    def _nonneg(cls, v):
        if any(e < 0 for e in v):
            raise ValueError("epsilons must be non-negative")
        return v


class EvolveConfig(_Strict):
    solver: Literal["volterra", "kinetic", "both"] = "volterra"
    modes: Optional[List[int]] = None
    probes: List[Tuple[int, float]] = []
    snapshot_every: int = Field(0, ge=0)


class AnalysisConfig(_Strict):
    window: Tuple[float, float] = (5.0, 40.0)
    weight_n: float = 4.0


class VerifyConfig(_Strict):
    criteria: List[int] = list(range(1, 11))
    overrides: Dict[int, Dict[str, Union[float, int, List[float]]]] = {}

    @field_validator("criteria")
    @classmethod
    def _known(cls, v):
        bad = [c for c in v if c not in CRITERIA]
        if bad:
            raise ValueError(f"unknown criteria {bad}")
        return v


class ScenarioConfig(_Strict):
    """Validated scenario; see ``README.md`` for the YAML layout."""

    physics: PhysicsConfig = PhysicsConfig()
    c_M: Optional[float] = None
    initial_data: InitialDataConfig = InitialDataConfig()
    time: TimeConfig = TimeConfig()
    velocity: VelocityConfig = VelocityConfig()
    penrose: PenroseConfig = PenroseConfig()
    evolve: EvolveConfig = EvolveConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    verify: VerifyConfig = VerifyConfig()
    seed: int = 0

    @model_validator(mode="after")
    def _consistent(self):
        PhysicalParams(**self.physics.model_dump())
        VelocityGrid(self.velocity.dxi, self.velocity.extent)
        for k in list(self.initial_data.amplitudes) + [k for k, _ in self.evolve.probes]:
            if self.physics.d != 1:
                break
            if abs(k) * self.time.t_end >= 1e7:
                raise ValueError(f"mode {k} is out of range")
        return self

    # --- derived objects ----------------------------------------------------

    @property
    def params(self) -> PhysicalParams:
        return PhysicalParams(**self.physics.model_dump())

    @property
    def family(self):
        i = self.initial_data
        amps = {k: (complex(*a) if isinstance(a, tuple) else complex(a)) for k, a in i.amplitudes.items()}
        if i.kind == "gaussian_hermite":
            return GaussianHermite(amps, tuple(i.poly), i.width, tuple(i.zero_mode_poly), self.physics.d)
        return FiniteSobolevTail(amps, i.n_decl, i.window_radius, self.physics.d)

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid.from_dt(self.time.t_end, self.time.dt)

    @property
    def velocity_grid(self) -> VelocityGrid:
        return VelocityGrid(self.velocity.dxi, self.velocity.extent)

    def canonical(self) -> dict:
        return json.loads(self.model_dump_json())

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class ConfigError(ValueError):
    pass


def load_config(path: Optional[Union[str, Path]]) -> ScenarioConfig:
    """Read and validate a YAML scenario; ``None`` gives the defaults."""
    if path is None:
        return ScenarioConfig()
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    try:
        return ScenarioConfig.model_validate(raw)
    except (ValidationError, ValueError) as err:
        raise ConfigError(str(err)) from err


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    command: str
    config_hash: str
    config: dict
    files: tuple
    metrics: dict
    version: str
    started: str
    finished: str
    timing: dict = field(default_factory=dict)

    def write(self, directory: Path) -> Path:
        path = directory / "record.json"
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        return path

    @classmethod
    def read(cls, path: Path) -> "RunRecord":
        data = json.loads(Path(path).read_text())
        data["files"] = tuple(data["files"])
        return cls(**data)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


class RunDirectoryExists(RuntimeError):
    pass


class Writer:
    """Single writer for one command's subdirectory of a run."""

    def __init__(self, root: Path, command: str, cfg: ScenarioConfig, force: bool, formats):
        self.dir = Path(root) / command
        if self.dir.exists() and any(self.dir.iterdir()):
            if not force:
                raise RunDirectoryExists(f"{self.dir} exists; pass --force to overwrite")
            shutil.rmtree(self.dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.cfg = cfg
        self.hash = cfg.hash()
        self.formats = set(formats)
        self.files: list = []
        self.started = _now()
        self.t0 = time.perf_counter()

    @property
    def header(self) -> str:
        return f"config_hash={self.hash}"

    def _track(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def json(self, name: str, obj) -> None:
        write_json(self._track(name), _plain(obj), self.hash)

    def csv_rows(self, name: str, rows: list) -> None:
        write_csv(self._track(name), rows, self.header)

    def csv_array(self, name: str, columns: list, names: list) -> None:
        np.savetxt(self._track(name), np.column_stack(columns), delimiter=",", fmt="%.17g",
                   header=f"{self.header}\n" + ",".join(names), comments="# ")

    def svg(self, name: str, draw) -> None:
        if "svg" not in self.formats:
            return
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        plt.rcParams["svg.hashsalt"] = self.hash
        fig, ax = plt.subplots(figsize=(6, 4))
        draw(ax)
        fig.tight_layout()
        fig.savefig(self._track(name), format="svg", metadata={"Date": None, "Creator": None,
                                                               "Description": self.header})
        plt.close(fig)

    def finish(self, metrics: dict, timing: Optional[dict] = None) -> RunRecord:
        rec = RunRecord(self.command, self.hash, self.cfg.canonical(), tuple(self.files), _plain(metrics),
                        __version__, self.started, _now(),
                        {"elapsed": time.perf_counter() - self.t0, **(timing or {})})
        rec.write(self.dir)
        return rec


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _plain(obj):
    return json.loads(json.dumps(obj, default=_jsonable))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_penrose(cfg: ScenarioConfig, out: Path, force: bool = False, threads: int = 1,
                formats=("csv", "json")) -> int:
    w = Writer(out, "penrose", cfg, force, formats)
    pc = cfg.penrose
    jobs = [(Model(m), e) for m in pc.models for e in pc.epsilons]

    def work(job):
        model, eps = job
        params = cfg.params.replace(model=model, epsilon=eps)
        kern = KernelSpec(model, params, cfg.c_M, zero=pc.zero_kernel)
        try:
            rep = penrose_margin(kern, Lambda=pc.Lambda, Z=pc.Z, k_max=pc.k_max, n_lambda=pc.n_lambda,
                                 n_zeta=pc.n_zeta, kappa_target=pc.kappa_target)
            return rep, None
        except CertificateError as err:
            return err.report, str(err)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    reports, rows, ok = [], [], True
    for (model, eps), (rep, err) in zip(jobs, results):
        d = rep.to_dict()
        d["error"] = err
        good = err is None and rep.certified_margin >= pc.kappa_target
        ok &= good
        reports.append(d)
        rows.append({"model": model.value, "epsilon": eps, "margin": rep.margin,
                     "certified_margin": rep.certified_margin, "certified": good})
        tag = f"{model.value}_eps{eps:g}"
        if "csv" in w.formats:
            lam, zet = np.meshgrid(rep.lams, rep.zetas, indexing="ij")
            w.csv_array(f"margin_map_{tag}.csv", [lam.ravel(), zet.ravel(), rep.margin_map.ravel()],
                        ["lambda", "zeta", "margin"])
        w.svg(f"margin_map_{tag}.svg", lambda ax, r=rep, t=tag: _draw_map(ax, r, t))
    for model in pc.models:
        mine = [r for r in rows if r["model"] == Model(model).value]
        ms = [r["margin"] for r in mine]
        trend = "non-increasing" if all(b <= a + 1e-12 for a, b in zip(ms, ms[1:])) else (
            "non-decreasing" if all(b >= a - 1e-12 for a, b in zip(ms, ms[1:])) else "mixed")
        for r in mine:
            r["trend"] = trend
    w.json("report.json", {"reports": reports})
    if "csv" in w.formats:
        w.csv_rows("margins.csv", rows)
    for r in rows:
        print(f"{r['model']:>18s}  eps={r['epsilon']:<6g} margin={r['margin']:.6f} "
              f"certified={r['certified_margin']:.6f} [{r.get('trend', '')}]")
    w.finish({"margins": rows, "passed": ok})
    return EXIT_OK if ok else EXIT_VERIFY


def _draw_map(ax, rep, tag):
    im = ax.pcolormesh(rep.lams, rep.zetas, rep.margin_map.T, shading="auto")
    ax.figure.colorbar(im, ax=ax, label="min_k |1 - K~|")
    ax.set_xlabel("Re tau")
    ax.set_ylabel("Im tau")
    ax.set_title(tag)


def cmd_evolve(cfg: ScenarioConfig, out: Path, force: bool = False, threads: int = 1,
               formats=("csv", "json")) -> int:
    w = Writer(out, "evolve", cfg, force, formats)
    params, fam, grid = cfg.params, cfg.family, cfg.time_grid
    modes = [k for k in (cfg.evolve.modes if cfg.evolve.modes is not None else fam.active_modes) if k != 0]
    metrics: dict = {"c_norm": 1.0 if cfg.c_M is None else cfg.c_M * (2 * np.pi) ** (params.d / 2)}
    t = grid.times
    volterra = kinetic = None
    if cfg.evolve.solver in ("volterra", "both"):
        def one(k):
            return density_mode(params, fam, k, grid, cfg.c_M)

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                trajs = list(pool.map(one, modes))
        else:
            trajs = [one(k) for k in modes]
        volterra = dict(zip(modes, trajs))
        for k, tr in volterra.items():
            if "csv" in w.formats:
                w.csv_array(f"volterra_mode_{k}.csv", [t, tr.rho.real, tr.rho.imag, np.abs(tr.rho)],
                            ["t", "re", "im", "abs"])
        nrm = density_norm(volterra, len(t)) if volterra else np.zeros(len(t))
        if "csv" in w.formats:
            w.csv_array("volterra_norm.csv", [t, nrm], ["t", "rho_norm"])
        metrics["volterra"] = _decay_metrics(cfg, t, nrm)
    if cfg.evolve.solver in ("kinetic", "both"):
        kmodes = sorted(set(modes) | {k for k, _ in cfg.evolve.probes})
        res = run_scenario(params, fam, cfg.velocity_grid, cfg.time.t_end, cfg.time.dt, cfg.c_M,
                           modes=kmodes, probes=[tuple(p) for p in cfg.evolve.probes],
                           snapshot_every=cfg.evolve.snapshot_every)
        kinetic = res
        if "csv" in w.formats:
            cols, names = [res.times, res.norm], ["t", "rho_norm"]
            for k in sorted(res.rho):
                cols += [res.rho[k].real, res.rho[k].imag]
                names += [f"re_rho_{k}", f"im_rho_{k}"]
            for (k, x) in sorted(res.probes):
                cols.append(res.probes[(k, x)])
                names.append(f"abs_h_{k}_{x:g}")
            w.csv_array("kinetic_series.csv", cols, names)
            for k, snaps in sorted(res.snapshots.items()):
                w.csv_array(f"kinetic_snapshots_{k}.csv", [cfg.velocity_grid.nodes, *snaps],
                            ["xi"] + [f"t{j}" for j in range(len(snaps))])
        metrics["kinetic"] = {**_decay_metrics(cfg, res.times, res.norm),
                              "boundary_warnings": res.boundary_warnings,
                              "lb_k0_relative_error": None if np.isnan(res.lb_k0_error) else res.lb_k0_error}
    if volterra is not None and kinetic is not None:
        dev = {str(k): relative_deviation(kinetic.rho[k], volterra[k].rho) for k in modes}
        metrics["cross_validation"] = {"max_relative_deviation": max(dev.values()) if dev else 0.0,
                                       "per_mode": dev}
        print(f"max Volterra-vs-kinetic relative deviation: {metrics['cross_validation']['max_relative_deviation']:.3e}")
    if volterra is not None or kinetic is not None:
        series = (density_norm(volterra, len(t)) if volterra is not None else kinetic.norm)
        w.svg("rho_norm.svg", lambda ax: _draw_norm(ax, t, series))
    w.json("summary.json", metrics)
    w.finish(metrics)
    return EXIT_OK


def _decay_metrics(cfg: ScenarioConfig, t, nrm) -> dict:
    n = cfg.analysis.weight_n
    eps = cfg.physics.epsilon if cfg.physics.model is Model.FOKKER_PLANCK else 0.0
    env = envelope_sup(t, nrm, weight_fn(n, eps))
    out = {"rho_norm_initial": float(nrm[0]), "rho_norm_final": float(nrm[-1]), "envelope": env.to_dict()}
    try:
        out["algebraic_fit"] = fit_algebraic_decay(t, nrm, tuple(cfg.analysis.window)).to_dict()
    except ValueError as err:
        out["algebraic_fit"] = {"error": str(err)}
    return out


def _draw_norm(ax, t, series):
    ax.semilogy(t, np.maximum(series, 1e-300))
    ax.set_xlabel("t")
    ax.set_ylabel("||rho(t)||")


def cmd_verify(cfg: ScenarioConfig, out: Path, force: bool = False, threads: int = 1,
               formats=("csv", "json")) -> int:
    w = Writer(out, "verify", cfg, force, formats)
    numbers = list(cfg.verify.criteria)
    if not numbers:
        log.warning("no acceptance criteria selected; verification passes vacuously")
    results = run_criteria(numbers, {int(k): dict(v) for k, v in cfg.verify.overrides.items()})
    rows = []
    for r in results:
        print(r.line())
        rows.append({"criterion": r.number, "title": r.title, "passed": r.passed})
    ok = all(r.passed for r in results)
    w.json("summary.json", {"passed": ok, "criteria": [
        {"criterion": r.number, "title": r.title, "passed": r.passed, "metrics": _strip_timing(r.metrics)}
        for r in results]})
    if "csv" in w.formats:
        w.csv_rows("summary.csv", rows)
    w.finish({"passed": ok, "criteria": rows}, {"criteria": {str(r.number): r.runtime for r in results}})
    return EXIT_OK if ok else EXIT_VERIFY


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in ("elapsed", "runtime")}
    return obj


def cmd_report(cfg: ScenarioConfig, out: Path, force: bool = False, threads: int = 1,
               formats=("csv", "json")) -> int:
    """Collect the records of previous subcommands in ``out`` into one summary."""
    records = {}
    for sub in ("penrose", "evolve", "verify"):
        path = Path(out) / sub / "record.json"
        if path.exists():
            records[sub] = RunRecord.read(path)
    if not records:
        raise ConfigError(f"no completed runs under {out}")
    w = Writer(out, "report", cfg, force, formats)
    summary = {sub: {"config_hash": r.config_hash, "files": list(r.files), "metrics": r.metrics}
               for sub, r in records.items()}
    w.json("summary.json", summary)
    for sub, r in records.items():
        passed = r.metrics.get("passed")
        print(f"{sub:8s} config={r.config_hash} files={len(r.files)}"
              + ("" if passed is None else f" passed={passed}"))
    w.finish({"subcommands": sorted(records)})
    return EXIT_OK


COMMANDS = {"penrose": cmd_penrose, "evolve": cmd_evolve, "verify": cmd_verify, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="landau-eps",
                                 description="Linear Landau damping with weak collisions: "
                                             "Penrose certificates, mode evolution and verification.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, default=None, help="YAML scenario file")
    ap.add_argument("--out", type=Path, default=Path("runs/default"), help="run directory")
    ap.add_argument("--force", action="store_true", help="overwrite an existing subdirectory")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--format", action="append", choices=["csv", "json", "svg"], dest="formats",
                    help="output formats (repeatable; default csv and json)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    formats = set(args.formats or ["csv", "json"]) | {"json"}
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args.out, args.force, args.threads, formats)
    except (ConfigError, RunDirectoryExists) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
