"""Hand-written SVG line plots for 30-sample epochs (no plotting library).

Output is a pure function of the inputs: fixed viewBox, fixed number formatting,
no timestamps.
"""
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

EPOCH_Y_RANGE = (-1.1, 1.1)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


@dataclass
class Panel:
    title: str
    series: list = field(default_factory=list)  # (label, values)


@dataclass
class SvgFigure:
    panels: list
    columns: int = 0  # 0: one row
    panel_width: int = 180
    panel_height: int = 150
    y_range: tuple = EPOCH_Y_RANGE
    title: str = ""

    @property
    def width(self):
        return self.panel_width * self._cols()

    @property
    def height(self):
        rows = -(-len(self.panels) // self._cols())
        return self.panel_height * rows + (24 if self.title else 0)

    def _cols(self):
        return self.columns or max(1, len(self.panels))

    def render(self):
        top = 24 if self.title else 0
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="11">',
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
        ]
        if self.title:
            out.append(f'<text x="{self.width / 2:.1f}" y="16" text-anchor="middle" font-size="13">'
                       f"{escape(self.title)}</text>")
        for i, panel in enumerate(self.panels):
            col, row = i % self._cols(), i // self._cols()
            out.extend(self._panel(panel, col * self.panel_width, top + row * self.panel_height))
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def _panel(self, panel, x0, y0):
        m_left, m_right, m_top, m_bot = 28, 8, 18, 14
        w = self.panel_width - m_left - m_right
        h = self.panel_height - m_top - m_bot
        lo, hi = self.y_range
        px0, py0 = x0 + m_left, y0 + m_top

        def sy(v):
            v = min(max(v, lo), hi)
            return py0 + (hi - v) / (hi - lo) * h

        parts = [
            f'<g class="panel">',
            f'<text x="{x0 + self.panel_width / 2:.1f}" y="{y0 + 13}" text-anchor="middle">{escape(panel.title)}</text>',
            f'<rect x="{px0}" y="{py0}" width="{w}" height="{h}" fill="none" stroke="#999"/>',
            f'<line x1="{px0}" y1="{sy(0):.2f}" x2="{px0 + w}" y2="{sy(0):.2f}" stroke="#ddd"/>',
        ]
        for tick in (-1, 0, 1):
            parts.append(f'<text x="{px0 - 3}" y="{sy(tick) + 4:.2f}" text-anchor="end" font-size="9">{tick}</text>')
        for k, (label, values) in enumerate(panel.series):
            n = len(values)
            step = w / max(n - 1, 1)
            pts = " ".join(f"{px0 + j * step:.2f},{sy(float(v)):.2f}" for j, v in enumerate(values))
            color = COLORS[k % len(COLORS)]
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}">'
                         f"<title>{escape(label)}</title></polyline>")
        parts.append("</g>")
        return parts

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.render())
