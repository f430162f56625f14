"""SVG figures for reports. Output is deterministic: fixed hash salt, no date."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "capstab"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return str(path)


def plot_spectrum(eigenvalues, constrained, eps_zero, path, title=""):
    """Lowest eigenvalues of the full and the constrained problem with the zero band."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    i = np.arange(len(eigenvalues))
    ax.plot(i, eigenvalues, "o", label="Robin problem")
    if constrained is not None and len(constrained):
        ax.plot(np.arange(len(constrained)) + 0.15, constrained, "s", mfc="none", label="constrained")
    ax.axhspan(-eps_zero, eps_zero, color="0.85", label="zero band")
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_field(mesh, values, path, title=""):
    """Heat map of a vertex function on the flattened parameter domain."""
    P = mesh.params if mesh.params is not None else mesh.vertices[:, :2]
    tri = mtri.Triangulation(P[:, 0], P[:, 1], mesh.faces)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    m = float(np.max(np.abs(values))) or 1.0
    pc = ax.tripcolor(tri, values, shading="gouraud", cmap="RdBu_r", vmin=-m, vmax=m)
    fig.colorbar(pc, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title, fontsize=9)
    return _save(fig, path)


def plot_sweep(param, values, lam1, lam2, path, title=""):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(values, lam1, "o-", label=r"$\lambda_1$")
    ax.plot(values, lam2, "s--", label=r"$\lambda_2$")
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel(param)
    ax.set_ylabel("eigenvalue")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    return _save(fig, path)
