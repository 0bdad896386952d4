"""Log-log convergence figures rendered next to a study report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import NullFormatter  # noqa: E402
import numpy as np  # noqa: E402

from .errors import IoError  # noqa: E402
from .study import ConvergenceReport  # noqa: E402

LABELS = {
    "rel_err_p": r"$\|p-p_h\|_0/\|p\|_0$",
    "rel_err_u": r"$\|u-\Pi^0_k u_h\|_0/\|u\|_0$",
    "err_divu": r"$\|\mathrm{div}(u-u_h)\|_0$",
    "err_p_proj": r"$\|p-p_I\|_0$",
    "err_superconv": r"$\|p_I-p_h\|_0$",
}


def _loglog(ax, report: ConvergenceReport, fields):
    h = np.array(report.column("h"))
    for name in fields:
        e = np.array(report.column(name))
        if np.any(e <= 0):
            continue
        (line,) = ax.loglog(h, e, "o-", label=LABELS.get(name, name))
        s = report.eoc.get("slope", {}).get(name)
        if s is not None and np.isfinite(s):
            ax.annotate(f"{s:.2f}", (h[-1], e[-1]), textcoords="offset points",
                        xytext=(-28, -4), color=line.get_color(), fontsize=9)
    ax.xaxis.set_minor_formatter(NullFormatter())
    ax.set_xlabel("h")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=9)
    ax.invert_xaxis()


def plot_report(report: ConvergenceReport, prefix) -> list[Path]:
    """Write ``<prefix>_errors.png`` and ``<prefix>_superconv.png``."""
    prefix = Path(prefix)
    cfg = report.config
    title = f"{cfg.problem}, {cfg.family}, k={cfg.degree}"
    out = []
    for suffix, fields in (
        ("errors", ("rel_err_p", "rel_err_u", "err_divu")),
        ("superconv", ("err_p_proj", "err_superconv")),
    ):
        fig, ax = plt.subplots(figsize=(5.5, 4.2))
        _loglog(ax, report, fields)
        ax.set_title(title)
        fig.tight_layout()
        path = prefix.with_name(f"{prefix.name}_{suffix}.png")
        try:
            fig.savefig(path, dpi=120)
        except OSError as exc:
            raise IoError(f"cannot write figure {path}: {exc}") from exc
        finally:
            plt.close(fig)
        out.append(path)
    return out
