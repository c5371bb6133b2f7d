"""Matplotlib figures for a finished run, written next to the CSV."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# (column, label, reference column or None, nominal control column or None)
_PANELS = {
    "tank": {
        "outputs": [("h2", "lower level h2", "y_ref", "y_meas")],
        "controls": [("u", "inflow u", "u_star")],
        "estimates": ["F_est"],
    },
    "reactor": {
        "outputs": [("c", "concentration c", "c_ref", "c_meas"), ("h", "level h", "h_ref", "h_meas")],
        "controls": [("Tc", "coolant temperature Tc", "Tc_star"), ("F", "outlet flow F", "F_star")],
        "estimates": ["F_est_c", "F_est_h"],
    },
}


def plot_log(log, path):
    """Draw outputs, controls and estimates of ``log`` into ``path`` (PNG)."""
    spec = _PANELS[log.plant]
    t = log["t"]
    unit = log.meta.get("time_unit", "")
    panels = len(spec["outputs"]) + len(spec["controls"]) + 1
    fig, axes = plt.subplots(panels, 1, figsize=(8, 2.2 * panels), sharex=True)
    ax_iter = iter(axes)

    for col, label, ref, meas in spec["outputs"]:
        ax = next(ax_iter)
        ax.plot(t, log[meas], color="0.75", lw=0.6, label="measured")
        ax.plot(t, log[col], lw=1.2, label="true")
        ax.plot(t, log[ref], "--", lw=1.0, label="reference")
        ax.set_ylabel(label)
        ax.legend(loc="best", fontsize="small")

    for col, label, nominal in spec["controls"]:
        ax = next(ax_iter)
        ax.step(t, log[col], where="post", lw=1.2, label="applied")
        if log.meta.get("controller") == "heol":
            ax.plot(t, log[nominal], "--", lw=1.0, label="nominal")
        ax.set_ylabel(label)
        ax.legend(loc="best", fontsize="small")

    ax = next(ax_iter)
    for col in spec["estimates"]:
        ax.plot(t, log[col], lw=0.8, label=col)
    ax.set_ylabel("estimated F")
    ax.legend(loc="best", fontsize="small")
    ax.set_xlabel(f"time [{unit}]" if unit else "time")

    title = log.meta.get("name")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
