/**
 * Minimal deterministic SVG builder: fixed canvas, no timestamps, all
 * numbers formatted through one rounding helper so reruns are
 * byte-identical.
 */

export const palette = [
  "#377eb8",
  "#e41a1c",
  "#4daf4a",
  "#984ea3",
  "#ff7f00",
  "#a65628",
  "#f781bf",
  "#999999",
]

export function fmt(v: number): string {
  if (!Number.isFinite(v)) {
    throw new Error(`cannot place non-finite coordinate ${v}`)
  }
  const s = v.toFixed(2)
  return s === "-0.00" ? "0.00" : s
}

export interface Scale {
  (v: number): number
  ticks: number[]
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1
  const f = ((v: number) => outLo + ((v - lo) / span) * (outHi - outLo)) as Scale
  f.ticks = niceTicks(lo, hi, 5)
  return f
}

export function log10Scale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(lo)
  const lhi = Math.log10(hi)
  const span = lhi - llo || 1
  const f = ((v: number) => outLo + ((Math.log10(v) - llo) / span) * (outHi - outLo)) as Scale
  const ticks: number[] = []
  for (let p = Math.ceil(llo); p <= Math.floor(lhi); p++) {
    ticks.push(10 ** p)
  }
  f.ticks = ticks.length >= 2 ? ticks : [lo, hi]
  return f
}

function niceTicks(lo: number, hi: number, n: number): number[] {
  const span = hi - lo || 1
  const step = 10 ** Math.floor(Math.log10(span / n))
  const err = span / n / step
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1
  const s = step * mult
  const ticks: number[] = []
  for (let v = Math.ceil(lo / s) * s; v <= hi + s * 1e-9; v += s) {
    ticks.push(Math.abs(v) < s * 1e-9 ? 0 : v)
  }
  return ticks
}

export function tickLabel(v: number): string {
  if (v === 0) return "0"
  const a = Math.abs(v)
  if (a >= 10000 || a < 0.01) return v.toExponential(0)
  return String(Math.round(v * 1000) / 1000)
}

export class Svg {
  private parts: string[] = []

  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="monospace" font-size="11">`,
    )
    this.rect(0, 0, width, height, "#ffffff")
  }

  rect(x: number, y: number, w: number, h: number, fill: string, stroke?: string): void {
    const s = stroke ? ` stroke="${stroke}"` : ""
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"${s}/>`,
    )
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"/>`,
    )
  }

  polyline(points: Array<[number, number]>, stroke: string): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ")
    this.parts.push(`<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="1.5"/>`)
  }

  text(x: number, y: number, content: string, anchor: "start" | "middle" | "end" = "start"): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}">${escapeXml(content)}</text>`,
    )
  }

  toString(): string {
    return this.parts.join("\n") + "\n</svg>\n"
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
}

export interface Panel {
  x: number
  y: number
  w: number
  h: number
}

/** Draw axes, ticks and labels for a panel; returns nothing, mutates svg. */
export function drawAxes(
  svg: Svg,
  panel: Panel,
  xScale: Scale,
  yScale: Scale,
  xLabel: string,
  yLabel: string,
): void {
  svg.rect(panel.x, panel.y, panel.w, panel.h, "none", "#333333")
  for (const t of xScale.ticks) {
    const px = xScale(t)
    if (px < panel.x - 0.5 || px > panel.x + panel.w + 0.5) continue
    svg.line(px, panel.y + panel.h, px, panel.y + panel.h + 4, "#333333")
    svg.text(px, panel.y + panel.h + 16, tickLabel(t), "middle")
  }
  for (const t of yScale.ticks) {
    const py = yScale(t)
    if (py < panel.y - 0.5 || py > panel.y + panel.h + 0.5) continue
    svg.line(panel.x - 4, py, panel.x, py, "#333333")
    svg.text(panel.x - 6, py + 4, tickLabel(t), "end")
  }
  svg.text(panel.x + panel.w / 2, panel.y + panel.h + 32, xLabel, "middle")
  svg.text(panel.x, panel.y - 8, yLabel, "start")
}

export function drawLegend(svg: Svg, x: number, y: number, entries: string[]): void {
  entries.forEach((label, i) => {
    const yy = y + 16 * i
    svg.line(x, yy - 4, x + 18, yy - 4, palette[i % palette.length], 2)
    svg.text(x + 24, yy, label)
  })
}
