import logging
from datetime import datetime, timezone
from typing import Sequence

import numpy as np
from jinja2.sandbox import SandboxedEnvironment

from rtbust.exceptions import ConfigurationError
from rtbust.rtbust_ingest.models import AnalysisWindow, UserSeries
from rtbust.rtbust_rtt.models import (
    CANVAS_SIZE,
    INSET_BINS,
    MARGIN,
    PALETTE,
    DelayHistogram,
    RttFigure,
    RttPoint,
)

logger = logging.getLogger(__name__)

PLOT_SIZE = CANVAS_SIZE - 2 * MARGIN
INSET_PAD = 10
RUG_HEIGHT = 6

SVG_TEMPLATE = """<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{{ size }}" height="{{ size }}" viewBox="0 0 {{ size }} {{ size }}">
<title>{{ title }}</title>
<rect x="0" y="0" width="{{ size }}" height="{{ size }}" fill="#ffffff"/>
<rect class="frame" x="{{ frame.x }}" y="{{ frame.y }}" width="{{ frame.w }}" height="{{ frame.h }}" fill="none" stroke="#000000" stroke-width="1"/>
<line class="diagonal" x1="{{ diagonal.x1 }}" y1="{{ diagonal.y1 }}" x2="{{ diagonal.x2 }}" y2="{{ diagonal.y2 }}" stroke="#999999" stroke-width="1" stroke-dasharray="4 3"/>
<text class="axis-label" x="{{ labels.x_mid }}" y="{{ labels.x_y }}" font-size="12" text-anchor="middle">retweet time (UTC)</text>
<text class="axis-label" x="{{ labels.y_x }}" y="{{ labels.y_mid }}" font-size="12" text-anchor="middle" transform="rotate(-90 {{ labels.y_x }} {{ labels.y_mid }})">original tweet time (UTC)</text>
<text class="tick" x="{{ frame.x }}" y="{{ labels.tick_y }}" font-size="10" text-anchor="start">{{ ticks.lo }}</text>
<text class="tick" x="{{ labels.right }}" y="{{ labels.tick_y }}" font-size="10" text-anchor="end">{{ ticks.hi }}</text>
<g class="markers">
{% for m in markers %}
<circle class="marker" cx="{{ m.cx }}" cy="{{ m.cy }}" r="1" fill="{{ m.color }}"/>
{% endfor %}
</g>
<g class="delay-inset">
<rect x="{{ inset.x }}" y="{{ inset.y }}" width="{{ inset.w }}" height="{{ inset.h }}" fill="#ffffff" fill-opacity="0.85" stroke="#000000" stroke-width="0.5"/>
{% for b in bars %}
<rect class="bin" x="{{ b.x }}" y="{{ b.y }}" width="{{ b.w }}" height="{{ b.h }}" fill="#4c72b0" data-count="{{ b.count }}"/>
{% endfor %}
{% for r in rug %}
<line class="rug" x1="{{ r.x }}" y1="{{ r.y1 }}" x2="{{ r.x }}" y2="{{ r.y2 }}" stroke="#000000" stroke-width="0.5"/>
{% endfor %}
<text x="{{ inset.label_x }}" y="{{ inset.label_y }}" font-size="9" text-anchor="middle">log10 retweet delay (s)</text>
</g>
{% if zoom %}
<g class="zoom-inset">
<rect x="{{ zoom.x }}" y="{{ zoom.y }}" width="{{ zoom.w }}" height="{{ zoom.h }}" fill="#ffffff" stroke="#000000" stroke-width="0.5"/>
<line class="zoom-diagonal" x1="{{ zoom.x }}" y1="{{ zoom.y2 }}" x2="{{ zoom.x2 }}" y2="{{ zoom.y }}" stroke="#999999" stroke-width="0.5"/>
{% for m in zoom.markers %}
<circle class="zoom-marker" cx="{{ m.cx }}" cy="{{ m.cy }}" r="1" fill="{{ m.color }}"/>
{% endfor %}
</g>
{% endif %}
</svg>
"""

_environment = SandboxedEnvironment(autoescape=True, trim_blocks=True, lstrip_blocks=True)
_template = _environment.from_string(SVG_TEMPLATE)


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def data_to_pixel(retweet_ts: float, source_ts: float, axis_range: tuple[int, int],
                  origin: tuple[float, float] = (MARGIN, MARGIN), size: float = PLOT_SIZE) -> tuple[float, float]:
    """Affine map from (retweet time, original time) to SVG pixels, y growing downwards."""
    lo, hi = axis_range
    scale = size / (hi - lo)
    x = origin[0] + (retweet_ts - lo) * scale
    y = origin[1] + size - (source_ts - lo) * scale
    return x, y


def delay_histogram(delays: Sequence[int], upper_s: float, bins: int = INSET_BINS) -> DelayHistogram:
    """
    Counts delays in ``bins`` log10-spaced bins from 1 s to ``upper_s``.
    Delays below 1 s go to the first bin and delays above ``upper_s`` to the last.
    """
    upper_s = max(float(upper_s), 10.0)
    edges = np.logspace(0.0, np.log10(upper_s), bins + 1)
    values = np.asarray(delays, dtype=np.float64)
    index = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, bins - 1)
    counts = np.bincount(index.astype(np.int64), minlength=bins) if values.size else np.zeros(bins, dtype=np.int64)
    return DelayHistogram(edges=[float(e) for e in edges], counts=[int(c) for c in counts])


def _axis_range(points: list[RttPoint], window: AnalysisWindow | None) -> tuple[int, int]:
    if window is not None:
        lo = min([window.t_ref, *(p.source_ts for p in points)])
        return lo, max(window.end, lo + 1)
    if not points:
        return 0, 1
    lo = min(p.source_ts for p in points)
    hi = max(p.retweet_ts for p in points)
    return lo, max(hi, lo + 1)


def build_figure(series_list: Sequence[UserSeries], window: AnalysisWindow | None = None,
                 zoom: tuple[int, int] | None = None, title: str = "") -> RttFigure:
    """
    Collects the points of every series, colouring account k with palette
    entry k mod 12. Without a window the axes span the plotted events.
    """
    points = [
        RttPoint(retweet_ts=event.retweet_ts, source_ts=event.source_ts, color_index=k % len(PALETTE))
        for k, series in enumerate(series_list)
        for event in series.events
    ]
    axis_range = _axis_range(points, window)
    upper = window.duration_s if window is not None else axis_range[1] - axis_range[0]
    delays = [p.delay for p in points]
    return RttFigure(
        title=title,
        points=points,
        axis_range=axis_range,
        histogram=delay_histogram(delays, upper),
        rug=[float(np.log10(max(d, 1))) for d in delays],
        n_accounts=len(series_list),
        zoom=zoom,
    )


def _utc(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%d %H:%M")


def _inset_box(left: float, top: float) -> dict:
    side = PLOT_SIZE / 2 - 2 * INSET_PAD
    return {"x": left, "y": top, "w": side, "h": side, "x2": left + side, "y2": top + side}


def render_svg(figure: RttFigure) -> str:
    """Renders the figure; identical figures give byte-identical documents."""
    markers = []
    for p in figure.points:
        x, y = data_to_pixel(p.retweet_ts, p.source_ts, figure.axis_range)
        markers.append({"cx": _fmt(x), "cy": _fmt(y), "color": PALETTE[p.color_index % len(PALETTE)]})

    inset = _inset_box(MARGIN + PLOT_SIZE / 2 + INSET_PAD, MARGIN + PLOT_SIZE / 2 + INSET_PAD)
    hist = figure.histogram
    log_lo, log_hi = np.log10(hist.edges[0]), np.log10(hist.edges[-1])
    usable = inset["h"] - 2 * RUG_HEIGHT - 14
    widths = np.diff(np.log10(hist.edges))
    total = max(hist.total, 1)
    density = np.asarray(hist.counts, dtype=np.float64) / (total * widths)
    peak = density.max() if density.size and density.max() > 0 else 1.0

    def inset_x(log_value: float) -> float:
        return inset["x"] + (log_value - log_lo) / (log_hi - log_lo) * inset["w"]

    baseline = inset["y2"] - 2 * RUG_HEIGHT - 12
    bars = []
    for i, count in enumerate(hist.counts):
        if count == 0:
            continue
        left, right = inset_x(np.log10(hist.edges[i])), inset_x(np.log10(hist.edges[i + 1]))
        height = density[i] / peak * usable
        bars.append({"x": _fmt(left), "y": _fmt(baseline - height), "w": _fmt(right - left), "h": _fmt(height),
                     "count": count})
    rug = [{"x": _fmt(inset_x(min(max(r, log_lo), log_hi))), "y1": _fmt(baseline + 2),
            "y2": _fmt(baseline + 2 + RUG_HEIGHT)} for r in figure.rug]
    inset_view = {k: _fmt(v) for k, v in inset.items()}
    inset_view.update(label_x=_fmt(inset["x"] + inset["w"] / 2), label_y=_fmt(inset["y2"] - 2))

    zoom_view = None
    if figure.zoom is not None:
        box = _inset_box(MARGIN + INSET_PAD, MARGIN + INSET_PAD)
        z0, z1 = figure.zoom
        zoom_markers = []
        for p in figure.points:
            if z0 <= p.source_ts and p.retweet_ts <= z1:
                x, y = data_to_pixel(p.retweet_ts, p.source_ts, (z0, z1), (box["x"], box["y"]), box["w"])
                zoom_markers.append({"cx": _fmt(x), "cy": _fmt(y), "color": PALETTE[p.color_index % len(PALETTE)]})
        zoom_view = {k: _fmt(v) for k, v in box.items()}
        zoom_view["markers"] = zoom_markers

    lo, hi = figure.axis_range
    return _template.render(
        size=CANVAS_SIZE,
        title=figure.title,
        frame={"x": MARGIN, "y": MARGIN, "w": PLOT_SIZE, "h": PLOT_SIZE},
        diagonal={"x1": MARGIN, "y1": MARGIN + PLOT_SIZE, "x2": MARGIN + PLOT_SIZE, "y2": MARGIN},
        labels={"x_mid": CANVAS_SIZE // 2, "x_y": CANVAS_SIZE - 12, "y_x": 16, "y_mid": CANVAS_SIZE // 2,
                "tick_y": MARGIN + PLOT_SIZE + 14, "right": MARGIN + PLOT_SIZE},
        ticks={"lo": _utc(lo), "hi": _utc(hi)},
        markers=markers,
        inset=inset_view,
        bars=bars,
        rug=rug,
        zoom=zoom_view,
    )


def rtt_single(user_series: UserSeries, window: AnalysisWindow | None = None) -> str:
    return render_svg(build_figure([user_series], window, title=user_series.user_id))


def rtt_group(series_list: Sequence[UserSeries], window: AnalysisWindow | None = None,
              zoom: tuple[int, int] | None = None) -> str:
    """
    Raises:
        ConfigurationError: If no series is given.
    """
    if not series_list:
        raise ConfigurationError("an RTT group plot needs at least one account")
    figure = build_figure(series_list, window, zoom, title=f"{len(series_list)} accounts")
    logger.info(f"Rendering {len(figure.points)} retweets of {figure.n_accounts} accounts")
    return render_svg(figure)


def parse_zoom(text: str) -> tuple[int, int]:
    """Parses ``t0:t1`` (epoch seconds)."""
    try:
        start, stop = (int(part) for part in text.split(":"))
    except ValueError as e:
        raise ConfigurationError(f"zoom must read t0:t1 with integer seconds, got '{text}'") from e
    if stop <= start:
        raise ConfigurationError(f"zoom end {stop} must follow its start {start}")
    return start, stop
