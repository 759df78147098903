"""Convergence plots as byte-deterministic SVG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# zero violations cannot be drawn on a log axis
FLOOR = 1e-16

_RC = {
    "svg.hashsalt": "sip-accel",
    "svg.fonttype": "path",
    "path.simplify": False,
}


def _objective_panel(trace, f_star):
    f = np.asarray(trace.f_value, dtype=float)
    if f_star is None:
        return f, "objective f(x_k)", "linear"
    return np.maximum(np.abs(f - f_star), FLOOR), "|f(x_k) - f*|", "log"


def plot_comparison(series, path, x: str = "k", f_star: float | None = None,
                    title: str | None = None) -> None:
    """Objective and violation panels, one curve per ``(label, trace)`` pair.

    ``x`` is ``"k"`` (iterations) or ``"wall_seconds"``.  Output bytes depend
    only on the inputs.
    """
    with plt.rc_context(_RC):
        fig, (ax_f, ax_v) = plt.subplots(1, 2, figsize=(10, 4))
        for label, trace in series:
            xs = np.asarray(getattr(trace, x), dtype=float)
            fv, f_label, f_scale = _objective_panel(trace, f_star)
            ax_f.plot(xs, fv, label=label)
            ax_v.plot(xs, np.maximum(np.asarray(trace.max_violation, dtype=float), FLOOR),
                      label=label)
        xlabel = "iteration" if x == "k" else "seconds"
        ax_f.set_yscale(f_scale)
        ax_f.set_ylabel(f_label)
        ax_v.set_yscale("log")
        ax_v.set_ylabel("max_i [g_i*(x_k)]_+")
        for ax in (ax_f, ax_v):
            ax.set_xlabel(xlabel)
            ax.grid(True, alpha=0.3)
        ax_v.legend(loc="best", fontsize="small")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
