"""
Stage orchestration: surfaces -> nac -> interp -> dynamics -> plotdata.

Every stage reads its inputs from the run directory, so any suffix of the chain can be
re-run against artifacts left by an earlier run. A stage leaves `.stage_<name>.done`
on success and `.stage_<name>.failed` (with its partial outputs) on error.
"""
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Optional

import pandas as pd

from config import RunConfig, load_config, worker_count
from data_source.manifest_utils import ManifestUtils
from data_source.table_utils import TableUtils
from exceptions import ConfigError, MissingArtifactError, NacdynError, NumericError
from utils import RunDirType, provenance_header, read_header

logger = logging.getLogger(__name__)

ENERGY_TABLE = "energies.csv"
NAC_TABLE = "nac.csv"
SURFACE_BUNDLE = "surfaces.bin"
POPULATIONS = "populations.csv"
ZERO_POINT = "zero_point_energies.csv"
SNAPSHOT_DIR = "snapshots"
PLOT_DIR = "plot"

# artifact each stage needs from an earlier one
_STAGE_INPUTS = {
    "nac": [("surfaces", ENERGY_TABLE)],
    "interp": [("surfaces", ENERGY_TABLE), ("nac", NAC_TABLE)],
    "dynamics": [("interp", SURFACE_BUNDLE)],
    "plotdata": [("dynamics", POPULATIONS)],
}


@dataclass
class ValidationReport:
    fatal: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.fatal

    def render(self) -> str:
        lines = [f"FATAL: {m}" for m in self.fatal] + [f"WARNING: {m}" for m in self.warnings]
        return "\n".join(lines) if lines else "config is valid"


def _snapshot_name(t_fs: float) -> str:
    return f"snapshot_{t_fs:.2f}fs.csv"


def _marker(output_dir: Path, stage: str, state: str) -> Path:
    return output_dir / f".stage_{stage}.{state}"


def _as_config(config: RunConfig | str | os.PathLike) -> RunConfig:
    return config if isinstance(config, RunConfig) else load_config(config)


def _bundle_path(config: RunConfig) -> Path:
    if config.surface_bundle is not None and "interp" not in config.stages:
        return config.surface_bundle
    return config.output_dir / SURFACE_BUNDLE


class PipelineUtils:

    def validate(
        config: Annotated[RunConfig | str | os.PathLike, "Run config or path to its JSON file"],
    ) -> ValidationReport:
        """Check every invariant a run relies on; unreadable or schema-violating files raise ConfigError"""
        config = _as_config(config)
        report = ValidationReport()
        report.fatal.extend(config.grid.spacing_issues())
        stages = config.ordered_stages()
        if not stages:
            report.fatal.append("no stages selected")

        if "surfaces" in stages or "nac" in stages:
            if config.manifest is None:
                report.fatal.append("stages surfaces/nac need a manifest")
            else:
                PipelineUtils._validate_manifest(config, report, need_displaced="nac" in stages)

        if {"nac", "interp"} & set(stages):
            report.fatal.extend(PipelineUtils._state_pair_issues(config))

        for stage in stages:
            for producer, artifact in _STAGE_INPUTS.get(stage, []):
                if producer in stages:
                    continue
                path = _bundle_path(config) if artifact == SURFACE_BUNDLE else config.output_dir / artifact
                if not path.is_file():
                    report.fatal.append(f"stage {stage} needs {path}, which neither exists nor is produced by this run")

        if not config.cap.enabled and "dynamics" in stages:
            report.warnings.append("absorbing potential disabled; flux reaching the grid edge will reflect")
        for stage in stages:
            if _marker(config.output_dir, stage, "failed").exists():
                report.warnings.append(f"stage {stage} failed in a previous run in {config.output_dir}")
        return report

    def _state_pair_issues(config: RunConfig) -> list[str]:
        """A and B must be two distinct excited SSVQE states; state 0 is X"""
        p, q = config.nac.state_pair
        k = len(config.ssvqe.initial_bitstrings)
        if p == q or min(p, q) < 1 or max(p, q) >= k:
            return [f"NAC state pair {config.nac.state_pair} needs two distinct excited states among the {k} SSVQE states"]
        return []

    def _validate_manifest(config: RunConfig, report: ValidationReport, need_displaced: bool) -> None:
        try:
            manifest = ManifestUtils.load_manifest(config.manifest)
        except NacdynError as e:
            report.fatal.append(str(e))
            return
        for tag, path in manifest.missing_files(need_displaced):
            report.fatal.append(f"missing FCIDUMP {path} for geometry (r={tag[0]}, theta={tag[1]})")
        weights = {b.count("1") for b in config.ssvqe.initial_bitstrings}
        if len(weights) > 1:
            report.warnings.append("initial bitstrings span several particle-number sectors")
        if config.ssvqe.layout == "brick_wall":
            report.warnings.append("brick_wall layout mixes spin sectors; spin-degenerate states may be returned twice")
        if "interp" in config.stages:
            g = config.grid
            r, theta = manifest.r_axis, manifest.theta_axis
            if g.r_min < r[0] - 1e-9 or g.r_max > r[-1] + 1e-9 or g.theta_min < theta[0] - 1e-9 or g.theta_max > theta[-1] + 1e-9:
                report.fatal.append(
                    f"dynamics grid leaves the coarse hull r=[{r[0]}, {r[-1]}], theta=[{theta[0]}, {theta[-1]}]"
                )

    def run_surfaces(config: RunConfig, workers: int = 1, progress: bool = True) -> Path:
        from functional.ssvqe import scan_grid

        manifest = ManifestUtils.load_manifest(config.manifest)
        manifest.require_files(need_displaced=False)
        results = scan_grid(manifest, config.ssvqe, config.seed, workers, progress)
        table = TableUtils.energy_table(results)
        path = config.output_dir / ENERGY_TABLE
        flagged = int((~table["converged"]).sum())
        TableUtils.save_table(
            table, "Energy table", path, provenance_header("surfaces", config, config.seed, unconverged=flagged)
        )
        return path

    def run_nac(config: RunConfig, workers: int = 1, progress: bool = True) -> Path:
        from functional.nac import compute_nac_field

        manifest = ManifestUtils.load_manifest(config.manifest)
        manifest.require_files(need_displaced=True)
        energies = TableUtils.energy_records(TableUtils.load_table(config.output_dir / ENERGY_TABLE), manifest)
        nac_field, _ = compute_nac_field(manifest, energies, config.ssvqe, config.nac, workers, progress)
        path = config.output_dir / NAC_TABLE
        TableUtils.save_table(
            TableUtils.nac_table(nac_field),
            "NAC table",
            path,
            provenance_header("nac", config, config.seed, masked=int(nac_field.mask.sum()), delta_r=manifest.delta_r),
        )
        return path

    def run_interp(config: RunConfig) -> Path:
        from functional.surfaces import assemble, interpolate

        energy = TableUtils.load_table(config.output_dir / ENERGY_TABLE)
        nac = TableUtils.load_table(config.output_dir / NAC_TABLE)
        fine = interpolate(assemble(energy, nac, config.nac.state_pair), config.grid, config.nac.gap_floor)
        path = config.output_dir / SURFACE_BUNDLE
        TableUtils.write_surface_bundle(fine, path, provenance_header("interp", config, config.seed))
        return path

    def run_dynamics(config: RunConfig, progress: bool = True) -> Path:
        from functional.dynamics import propagate, zero_point_energies

        fine = TableUtils.read_surface_bundle(_bundle_path(config))
        result = propagate(fine, config.grid, config.mass, config.cap, config.dynamics, progress)
        out = config.output_dir
        header = provenance_header(
            "dynamics",
            config,
            config.seed,
            isotope=config.dynamics.isotope,
            zero_point_energy=f"{result.zero_point_energy:.12g}",
            dt=f"{result.dt:.12g}",
            stability_estimate=f"{result.stability_estimate:.12g}",
            energy_offset=f"{result.energy_offset:.12g}",
        )
        TableUtils.save_table(result.populations, "Populations", out / POPULATIONS, header)
        for t_fs, (t_actual, density_B, density_A) in result.snapshots.items():
            table = TableUtils.snapshot_table(fine.r, fine.theta, density_B, density_A)
            TableUtils.save_table(
                table,
                f"Snapshot at {t_fs} fs",
                out / SNAPSHOT_DIR / _snapshot_name(t_fs),
                {**header, "requested_t_fs": f"{t_fs:g}", "t_fs": f"{t_actual:.12g}"},
            )
        zpe = zero_point_energies(fine.E_X, config.grid)
        TableUtils.save_table(zpe, "Zero-point energies", out / ZERO_POINT, provenance_header("dynamics", config, config.seed))
        for row in zpe.itertuples(index=False):
            logger.info("zero-point energy (%s): %.6f hartree", row.isotope, row.zero_point_energy)
        return out / POPULATIONS

    def emit_plot_data(
        run_dir: RunDirType,
        figures: Annotated[bool, "Also render PNG figures with matplotlib"] = False,
    ) -> list[Path]:
        """Population table plus one gridded |chi|^2 matrix (rows r, columns theta) per snapshot and state"""
        run_dir = Path(run_dir)
        populations = TableUtils.load_table(run_dir / POPULATIONS)
        plot_dir = run_dir / PLOT_DIR
        header = {k: v for k, v in read_header(run_dir / POPULATIONS).items() if k != "stage"}
        header["stage"] = "plotdata"
        written = [plot_dir / "populations.csv"]
        TableUtils.save_table(populations, "Plot populations", written[0], header)
        snapshots = sorted((run_dir / SNAPSHOT_DIR).glob("snapshot_*fs.csv")) if (run_dir / SNAPSHOT_DIR).is_dir() else []
        for path in snapshots:
            r, theta, density_B, density_A = TableUtils.snapshot_grids(TableUtils.load_table(path))
            label = path.stem.removeprefix("snapshot_")
            for state, density in (("B", density_B), ("A", density_A)):
                matrix = pd.DataFrame(density, columns=[f"{t:.10g}" for t in theta])
                matrix.insert(0, "r", r)
                target = plot_dir / f"density_{state}_{label}.csv"
                TableUtils.save_table(matrix, f"{state} density {label}", target, header)
                written.append(target)
            if figures:
                from functional.charting import PlotUtils

                t_fs = float(read_header(path).get("t_fs", "nan"))
                PlotUtils.plot_snapshot(r, theta, density_B, density_A, t_fs, str(plot_dir / f"snapshot_{label}.png"))
        if figures:
            from functional.charting import PlotUtils

            PlotUtils.plot_populations(populations, str(plot_dir / "populations.png"))
        return written

    def run(
        config: Annotated[RunConfig | str | os.PathLike, "Run config or path to its JSON file"],
        progress: Annotated[bool, "Show progress bars"] = True,
        workers: Annotated[Optional[int], "Process-pool size; defaults to NACDYN_WORKERS"] = None,
    ) -> int:
        """Validate, then run the selected stages in order; returns the exit status"""
        try:
            config = _as_config(config)
            report = PipelineUtils.validate(config)
        except ConfigError as e:
            logger.error("%s", e)
            return e.exit_code
        for message in report.warnings:
            logger.warning("%s", message)
        if not report.ok:
            for message in report.fatal:
                logger.error("%s", message)
            return 1

        workers = worker_count() if workers is None else max(1, workers)
        out = config.output_dir
        out.mkdir(parents=True, exist_ok=True)
        runners = {
            "surfaces": lambda: PipelineUtils.run_surfaces(config, workers, progress),
            "nac": lambda: PipelineUtils.run_nac(config, workers, progress),
            "interp": lambda: PipelineUtils.run_interp(config),
            "dynamics": lambda: PipelineUtils.run_dynamics(config, progress),
            "plotdata": lambda: PipelineUtils.emit_plot_data(out),
        }
        for stage in config.ordered_stages():
            _marker(out, stage, "done").unlink(missing_ok=True)
            logger.info("stage %s", stage)
            try:
                runners[stage]()
            except NacdynError as e:
                _marker(out, stage, "failed").write_text(f"{type(e).__name__}: {e}\n")
                logger.error("stage %s failed: %s", stage, e)
                return e.exit_code
            except Exception as e:
                _marker(out, stage, "failed").write_text(f"{type(e).__name__}: {e}\n")
                logger.exception("stage %s failed unexpectedly", stage)
                return NumericError.exit_code
            _marker(out, stage, "failed").unlink(missing_ok=True)
            _marker(out, stage, "done").write_text("")
        return 0


def artifact_summary(run_dir: RunDirType) -> dict:
    """Which stage artifacts exist in a run directory, and the final population row"""
    run_dir = Path(run_dir)
    summary = {
        "run_dir": str(run_dir),
        "stages_done": sorted(p.name[len(".stage_"):-len(".done")] for p in run_dir.glob(".stage_*.done")),
        "stages_failed": sorted(p.name[len(".stage_"):-len(".failed")] for p in run_dir.glob(".stage_*.failed")),
    }
    populations = run_dir / POPULATIONS
    if populations.is_file():
        last = TableUtils.load_table(populations).iloc[-1]
        summary["final"] = {k: float(v) for k, v in last.items()}
        summary["header"] = read_header(populations)
    zpe = run_dir / ZERO_POINT
    if zpe.is_file():
        summary["zero_point_energies"] = {
            row.isotope: float(row.zero_point_energy) for row in TableUtils.load_table(zpe).itertuples(index=False)
        }
    if not (populations.is_file() or summary["stages_done"] or summary["stages_failed"]):
        raise MissingArtifactError(f"no pipeline artifacts in {run_dir}", str(run_dir))
    return summary
