"""SVG plots of mean curves with a +-1 std band."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ValidationError  # noqa: E402


@dataclass(frozen=True)
class Series:
    name: str
    x: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_runs(cls, name: str, x, runs) -> "Series":
        """Mean and population std over the rows of ``runs``."""
        r = np.asarray(runs, dtype=float)
        if r.ndim == 1:
            r = r[None, :]
        return cls(name, np.asarray(x, dtype=float), r.mean(axis=0), r.std(axis=0))


def emit_plot(series, path: str | Path, xlabel: str = "step", ylabel: str = "value",
              title: str | None = None) -> Path:
    """Write one line per series plus its shaded band.

    Lines carry the SVG id ``line-<i>`` and bands ``band-<i>``; text is kept as
    text so legend entries can be read back from the file.
    """
    series = list(series)
    if not series:
        raise ValidationError("need at least one series to plot")
    path = Path(path)
    with matplotlib.rc_context({"svg.fonttype": "none", "svg.hashsalt": "rise-explore",
                                "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        try:
            for i, s in enumerate(series):
                x, m, sd = (np.asarray(v, dtype=float) for v in (s.x, s.mean, s.std))
                if not (x.shape == m.shape == sd.shape):
                    raise ValidationError(f"series {s.name!r} has mismatched lengths")
                (line,) = ax.plot(x, m, label=s.name, lw=1.5)
                line.set_gid(f"line-{i}")
                band = ax.fill_between(x, m - sd, m + sd, alpha=0.2, color=line.get_color(), lw=0)
                band.set_gid(f"band-{i}")
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if title:
                ax.set_title(title)
            ax.legend(loc="best")
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return path
