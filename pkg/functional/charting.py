import os
from typing import Annotated

import matplotlib

matplotlib.use("Agg")

import numpy as np
import pandas as pd
from matplotlib import pyplot as plt


class PlotUtils:

    def plot_populations(
        populations: Annotated[pd.DataFrame, "Population table: t_fs, P_B, P_A, absorbed_A, ..."],
        save_path: Annotated[str, "File path (or directory) where the plot should be saved"],
        title: Annotated[str, "Figure title"] = "State populations",
    ) -> str:
        """Plot P_B, P_A and the flux absorbed on A against time."""
        plt.rcParams.update({"font.size": 14})
        fig, ax = plt.subplots(figsize=(10, 6))
        t = populations["t_fs"]
        ax.plot(t, populations["P_B"], label="B population", color="tab:green")
        ax.plot(t, populations["P_A"], label="A population", color="tab:purple")
        ax.plot(t, populations["absorbed_A"], label="absorbed on A", color="tab:purple", linestyle="--")
        ax.set_xlabel("Time (fs)")
        ax.set_ylabel("Population")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(title)
        ax.legend()
        ax.grid(True)
        fig.tight_layout()
        plot_path = os.path.join(save_path, "populations.png") if os.path.isdir(save_path) else save_path
        fig.savefig(plot_path)
        plt.close(fig)
        return f"population chart saved to <img {plot_path}>"

    def plot_snapshot(
        r: Annotated[np.ndarray, "r axis (bohr)"],
        theta: Annotated[np.ndarray, "theta axis (radian)"],
        density_B: Annotated[np.ndarray, "|chi_B|^2 with rows along r"],
        density_A: Annotated[np.ndarray, "|chi_A|^2 with rows along r"],
        t_fs: Annotated[float, "Snapshot time (fs)"],
        save_path: Annotated[str, "File path (or directory) where the plot should be saved"],
    ) -> str:
        """Side-by-side density maps of the packet on B and A, theta in degrees."""
        fig, axes = plt.subplots(1, 2, figsize=(12, 5), sharey=True)
        vmax = max(float(density_B.max()), float(density_A.max()), 1e-12)
        extent = [np.degrees(theta[0]), np.degrees(theta[-1]), r[0], r[-1]]
        for ax, density, label in ((axes[0], density_B, "B"), (axes[1], density_A, "A")):
            image = ax.imshow(density, origin="lower", aspect="auto", extent=extent, vmin=0.0, vmax=vmax, cmap="viridis")
            ax.set_title(f"{label} at {t_fs:.1f} fs")
            ax.set_xlabel("HOH angle (deg)")
        axes[0].set_ylabel("OH length (bohr)")
        fig.colorbar(image, ax=axes, label="|chi|^2")
        plot_path = (
            os.path.join(save_path, f"snapshot_{t_fs:.2f}fs.png") if os.path.isdir(save_path) else save_path
        )
        fig.savefig(plot_path)
        plt.close(fig)
        return f"snapshot chart saved to <img {plot_path}>"
