"""Raster copies of the SVG plots, rendered with matplotlib's Agg backend."""
import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .svg import Axes  # noqa: E402


def render_png(series, axes=None, dpi=100):
    """PNG bytes for the same ``(label, xs, ys)`` series that :func:`emit_svg` takes."""
    axes = axes or Axes()
    if not series:
        raise ValueError("need at least one series")
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    try:
        for label, xs, ys in series:
            ax.plot(list(xs), list(ys), marker="o" if axes.markers else None, ms=3, label=str(label))
        if axes.xlog:
            ax.set_xscale("log")
        if axes.ylog:
            ax.set_yscale("log")
        ax.set_xlabel(axes.xlabel)
        ax.set_ylabel(axes.ylabel)
        ax.set_title(axes.title)
        if axes.annotations:
            ax.text(0.02, 0.97, "\n".join(map(str, axes.annotations)), transform=ax.transAxes,
                    va="top", fontsize=9)
        ax.legend(fontsize=8, loc="best")
        fig.tight_layout()
        buf = io.BytesIO()
        # no Software tag, so the bytes do not depend on the matplotlib build string
        fig.savefig(buf, format="png", dpi=dpi, metadata={"Software": None})
        return buf.getvalue()
    finally:
        plt.close(fig)
