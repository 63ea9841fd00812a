"""
nacdyn MCP server using FastMCP with stdio transport
"""
import json
from textwrap import dedent
from typing import Annotated

from mcp.server.fastmcp import FastMCP

server = FastMCP(
    "nacdyn",
    instructions=dedent(
        """
        Role: Nonadiabatic dynamics assistant

        The tools drive a pipeline that turns per-geometry FCIDUMP Hamiltonians into adiabatic
        surfaces and nonadiabatic couplings with a simulated SSVQE solver, then propagates a
        two-surface nuclear wavepacket on an (r, theta) grid.

        1. Call validate_config_tool before running; fix every FATAL line first.
        2. run_pipeline_tool runs the stages selected in the config and returns the exit status
           (0 ok, 1 input error, 2 numeric failure).
        3. plot_data_tool writes plot-ready tables (and optional PNG figures) for a finished run.
        4. run_summary_tool reports which stages finished and the final populations.
        5. synthetic_run_tool writes a self-contained synthetic example to experiment with.
        """
    ),
)


@server.tool()
def validate_config_tool(
    config_path: Annotated[str, "path to the JSON run config"],
) -> str:
    """Check a run config; returns FATAL and WARNING lines"""
    from pipeline import PipelineUtils

    return PipelineUtils.validate(config_path).render()


@server.tool()
def run_pipeline_tool(
    config_path: Annotated[str, "path to the JSON run config"],
    workers: Annotated[int, "process-pool size for the SSVQE and NAC stages"] = 1,
) -> str:
    """Run the configured stages and report the exit status"""
    from pipeline import PipelineUtils

    status = PipelineUtils.run(config_path, progress=False, workers=workers)
    return f"pipeline finished with exit status {status}"


@server.tool()
def plot_data_tool(
    run_dir: Annotated[str, "output directory of a finished run"],
    figures: Annotated[bool, "also render PNG figures"] = True,
) -> str:
    """Write population and density tables for plotting"""
    from pipeline import PipelineUtils

    paths = PipelineUtils.emit_plot_data(run_dir, figures=figures)
    return "\n".join(str(p) for p in paths)


@server.tool()
def run_summary_tool(
    run_dir: Annotated[str, "output directory of a run"],
) -> str:
    """Stages completed, final populations and zero-point energies of a run"""
    from pipeline import artifact_summary

    return json.dumps(artifact_summary(run_dir), indent=2)


@server.tool()
def synthetic_run_tool(
    out_dir: Annotated[str, "directory receiving the synthetic manifest, bundle and config"],
    n_r: Annotated[int, "coarse r points"] = 5,
    n_theta: Annotated[int, "coarse theta points"] = 5,
) -> str:
    """Write a synthetic conical-intersection example and return its config path"""
    from functional.synthetic import write_synthetic_run

    return str(write_synthetic_run(out_dir, coarse_shape=(n_r, n_theta)))


if __name__ == "__main__":
    # Run the server with stdio transport
    server.run(transport="stdio")
