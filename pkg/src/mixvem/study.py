"""Mesh-sequence convergence studies and their CSV/JSON reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .assembly import STABILIZATIONS, assemble
from .errors import IoError, MixVemError
from .mesh import FAMILIES, PolygonalMesh, generate_family, load_mesh, save_mesh
from .problems import get_problem
from .solve import ERROR_FIELDS, compute_eoc, compute_errors, divergence_defect, solve
from .space import build_all_ops

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "n_elems", "h", "err_p", "err_u", "err_divu", "err_p_proj", "err_superconv",
    "rel_err_p", "rel_err_u", "norm_p", "norm_u", "norm_divu",
    "n_dofs", "residual", "div_defect",
)


@dataclass
class StudyConfig:
    problem: str = "benchmark"
    family: str = "square"
    sizes: tuple[int, ...] = (25, 100, 400, 1600)
    degree: int = 1
    quad_degree: int | None = None
    stab: str = "nu_min"
    seed: int = 0
    mesh_files: tuple[str, ...] = ()
    lloyd_iters: int | None = None

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        self.mesh_files = tuple(str(m) for m in self.mesh_files)
        if not 0 <= self.degree <= 4:
            raise ValueError("degree must be in 0..4")
        if self.family not in FAMILIES + ("file",):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "file":
            if not self.mesh_files:
                raise ValueError("family 'file' needs mesh files")
        elif any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be strictly increasing")
        elif self.family in ("square", "concave") and any(
                s < 1 or round(s**0.5) ** 2 != s for s in self.sizes):
            raise ValueError(f"{self.family} sizes count grid squares and must be perfect squares")
        elif any(s < 2 for s in self.sizes):
            raise ValueError("Voronoi families need at least 2 cells")
        if self.stab not in STABILIZATIONS:
            raise ValueError(f"unknown stabilization {self.stab!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        return cls(**d)


@dataclass
class ConvergenceReport:
    config: StudyConfig
    rows: list[dict] = field(default_factory=list)
    eoc: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "rows": self.rows,
            "eoc": self.eoc,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        cfg = dict(d["config"])
        cfg["sizes"] = tuple(cfg.get("sizes", ()))
        cfg["mesh_files"] = tuple(cfg.get("mesh_files", ()))
        return cls(StudyConfig.from_dict(cfg), list(d["rows"]), dict(d["eoc"]),
                   dict(d.get("metadata", {})))

    def column(self, name: str) -> list[float]:
        return [r[name] for r in self.rows]


def _mesh_sources(config: StudyConfig):
    """``(label, loader)`` pairs, one per mesh of the sequence."""
    if config.family == "file":
        return [(path, lambda p=path: load_mesh(p)) for path in config.mesh_files]
    return [(size, lambda s=size: generate_family(config.family, s, config.seed,
                                                  config.lloyd_iters))
            for size in config.sizes]


def run_mesh(mesh: PolygonalMesh, config: StudyConfig) -> dict:
    """Discretize, solve and measure errors on one mesh; returns a report row."""
    problem = get_problem(config.problem)
    k = config.degree
    ops = build_all_ops(mesh, k, config.quad_degree)
    system = assemble(mesh, ops, problem.coeffs, config.stab, config.quad_degree)
    sol = solve(system, ops)
    bundle = compute_errors(mesh, ops, sol, problem)
    row = bundle.as_dict()
    row["n_dofs"] = system.dofmap.size
    row["residual"] = sol.residual
    row["div_defect"] = divergence_defect(ops, sol, problem, system.dofmap)
    return {c: row[c] for c in CSV_COLUMNS}


def run_study(config: StudyConfig, dump_mesh=None) -> ConvergenceReport:
    """Run every mesh of the sequence; optionally save generated meshes to ``dump_mesh``."""
    t0 = time.perf_counter()
    rows = []
    if dump_mesh is not None:
        Path(dump_mesh).mkdir(parents=True, exist_ok=True)
    for label, load in _mesh_sources(config):
        try:
            mesh = load()
            if dump_mesh is not None and config.family != "file":
                save_mesh(mesh, Path(dump_mesh) / f"{config.family}_{label}.json")
            row = run_mesh(mesh, config)
        except MixVemError as exc:
            raise type(exc)(f"{config.family} mesh {label}: {exc}") from exc
        log.info("%s %s: h=%.4g err_p=%.3e err_u=%.3e", config.family, label,
                 row["h"], row["err_p"], row["err_u"])
        rows.append(row)
    rows.sort(key=lambda r: -r["h"])
    eoc = compute_eoc(rows) if len({r["h"] for r in rows}) >= 2 else {}
    meta = {"wall_time": time.perf_counter() - t0}
    return ConvergenceReport(config, rows, eoc, meta)


# --------------------------------------------------------------------------
# emission


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def report_to_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    if not report.rows:
        return buf.getvalue()
    for name, s in report.eoc.get("slope", {}).items():
        buf.write(f"# eoc {name} {_fmt(s)}\n")
    for name, ps in report.eoc.get("pairwise", {}).items():
        buf.write(f"# pairwise_eoc {name} {' '.join(_fmt(p) for p in ps)}\n")
    cfg = asdict(report.config)
    buf.write(f"# config {json.dumps(cfg, sort_keys=True)}\n")
    if "wall_time" in report.metadata:
        buf.write(f"# wall_time {report.metadata['wall_time']:.3f}\n")
    return buf.getvalue()


def report_to_json(report: ConvergenceReport) -> str:
    return json.dumps(report.to_dict(), indent=2)


def emit(report: ConvergenceReport, path, fmt: str = "csv") -> Path:
    if fmt not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    text = report_to_csv(report) if fmt == "csv" else report_to_json(report)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc}") from exc
    return path


def load_report_json(path) -> ConvergenceReport:
    try:
        return ConvergenceReport.from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise IoError(f"cannot read report {path}: {exc}") from exc


def read_csv_rows(text: str) -> list[dict]:
    """Data rows of an emitted CSV, comment lines skipped."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    out = []
    for r in csv.DictReader(lines):
        out.append({k: (int(v) if k in ("n_elems", "n_dofs") else float(v))
                    for k, v in r.items()})
    return out


__all__ = [
    "CSV_COLUMNS", "ConvergenceReport", "ERROR_FIELDS", "StudyConfig", "emit",
    "load_report_json", "read_csv_rows", "report_to_csv", "report_to_json",
    "run_mesh", "run_study",
]
