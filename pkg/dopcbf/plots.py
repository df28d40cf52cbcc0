"""Stacked line-plot panels rendered to SVG with matplotlib.

Figures are built with the object API (no pyplot state), so rendering is
safe inside batch worker processes. The SVG hash salt is fixed and the date
metadata dropped, so the same data always gives the same bytes.
"""

import io
from dataclasses import dataclass, field
from typing import List, Sequence

import matplotlib
from matplotlib.figure import Figure

PANEL_HEIGHT = 2.2
WIDTH = 8.0
SVG_SALT = "dopcbf"


@dataclass
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]


@dataclass
class Panel:
    title: str
    y_label: str
    series: List[Series] = field(default_factory=list)
    zero_line: bool = False
    x_label: str = "t [s]"


def _draw(ax, panel: Panel, markers: bool) -> None:
    for s in panel.series:
        ax.plot(s.xs, s.ys, label=s.label, linewidth=1.2, marker="o" if markers else None, markersize=4)
    if panel.zero_line:
        ax.axhline(0.0, color="0.5", linestyle="--", linewidth=0.8)
    ax.set_title(panel.title, fontsize=10, loc="left")
    ax.set_ylabel(panel.y_label)
    ax.set_xlabel(panel.x_label)
    ax.grid(True, alpha=0.3)
    if panel.series:
        ax.legend(loc="upper right", fontsize=8)


def render_panels(panels: Sequence[Panel], title: str = "", markers: bool = False) -> str:
    """SVG text of `panels` stacked top to bottom."""
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
        fig = Figure(figsize=(WIDTH, PANEL_HEIGHT * max(1, len(panels)) + 0.6), layout="constrained")
        axes = fig.subplots(nrows=max(1, len(panels)), ncols=1, squeeze=False)[:, 0]
        for ax, panel in zip(axes, panels):
            _draw(ax, panel, markers)
        if title:
            fig.suptitle(title)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()
