/**
 * Figure renderers: SNR curves, band-energy panels, cache-table strips.
 * Each reads the documented CSV/JSON formats and writes one SVG.
 */
import { readFileSync, writeFileSync } from "node:fs"

import { FormatError, Table, fileStem, parseCsv } from "./csv.js"
import { Panel, Svg, drawAxes, drawLegend, linearScale, log10Scale, palette } from "./svg.js"

const WIDTH = 640
const HEIGHT = 400

function loadTables(csvPaths: string[], header: string): Table[] {
  if (csvPaths.length === 0) {
    throw new FormatError("no input files given")
  }
  return csvPaths.map(p => parseCsv(readFileSync(p, "utf8"), header))
}

function extent(values: number[]): [number, number] {
  let lo = Infinity
  let hi = -Infinity
  for (const v of values) {
    if (v < lo) lo = v
    if (v > hi) hi = v
  }
  return [lo, hi]
}

function drawCurves(
  svg: Svg,
  panel: Panel,
  tables: Table[],
  col: number,
  yScale: (v: number) => number,
  xScale: (v: number) => number,
): void {
  tables.forEach((tb, i) => {
    const pts = tb.rows.map(r => [xScale(r[0]), yScale(r[col])] as [number, number])
    svg.polyline(pts, palette[i % palette.length])
  })
}

export function renderSnr(csvPaths: string[], outPath: string): void {
  const tables = loadTables(csvPaths, "step,snr")
  const panel: Panel = { x: 60, y: 30, w: WIDTH - 220, h: HEIGHT - 80 }
  const steps = tables.flatMap(t => t.rows.map(r => r[0]))
  const snrs = tables.flatMap(t => t.rows.map(r => Math.max(r[1], 1e-12)))
  const [xlo, xhi] = extent(steps)
  const [ylo, yhi] = extent(snrs)
  // denoising runs from high step to low: keep step decreasing rightward
  const x = linearScale(xhi, xlo, panel.x, panel.x + panel.w)
  const y = log10Scale(ylo, yhi === ylo ? ylo * 10 : yhi, panel.y + panel.h, panel.y)
  const svg = new Svg(WIDTH, HEIGHT)
  drawAxes(svg, panel, x, y, "denoising step", "SNR (log)")
  tables.forEach(tb =>
    tb.rows.forEach(r => {
      r[1] = Math.max(r[1], 1e-12)
    }),
  )
  drawCurves(svg, panel, tables, 1, y, x)
  drawLegend(svg, panel.x + panel.w + 16, panel.y + 12, csvPaths.map(fileStem))
  writeFileSync(outPath, svg.toString())
}

export function renderBands(csvPaths: string[], outPath: string): void {
  const tables = loadTables(csvPaths, "step,low_l2,high_l2")
  const svg = new Svg(WIDTH, HEIGHT)
  const panels: Panel[] = [
    { x: 60, y: 30, w: 200, h: HEIGHT - 80 },
    { x: 330, y: 30, w: 200, h: HEIGHT - 80 },
  ]
  const steps = tables.flatMap(t => t.rows.map(r => r[0]))
  const [xlo, xhi] = extent(steps)
  const titles = ["low band L2", "high band L2"]
  for (const [i, panel] of panels.entries()) {
    const col = i + 1
    const vals = tables.flatMap(t => t.rows.map(r => r[col]))
    const [vlo, vhi] = extent(vals)
    const x = linearScale(xhi, xlo, panel.x, panel.x + panel.w)
    const y = linearScale(Math.min(vlo, 0), vhi === vlo ? vlo + 1 : vhi, panel.y + panel.h, panel.y)
    drawAxes(svg, panel, x, y, "denoising step", titles[i])
    drawCurves(svg, panel, tables, col, y, x)
  }
  drawLegend(svg, 545, 42, csvPaths.map(fileStem))
  writeFileSync(outPath, svg.toString())
}

const TAG_COLORS: Record<string, string> = {
  none: "#bdbdbd",
  attn: "#377eb8",
  mlp: "#e41a1c",
  both: "#4daf4a",
}

export function renderTable(tableJsonPath: string, outPath: string): void {
  let parsed: unknown
  try {
    parsed = JSON.parse(readFileSync(tableJsonPath, "utf8"))
  } catch (e) {
    throw new FormatError(`cannot parse ${tableJsonPath}: ${(e as Error).message}`)
  }
  const obj = parsed as { T?: unknown; tags?: unknown }
  if (typeof obj.T !== "number" || !Array.isArray(obj.tags)) {
    throw new FormatError("cache table JSON needs integer T and a tags array")
  }
  if (obj.tags.length !== obj.T) {
    throw new FormatError(`table lists ${obj.tags.length} tags for T=${obj.T}`)
  }
  const tags = obj.tags.map(t => {
    if (typeof t !== "string" || !(t in TAG_COLORS)) {
      throw new FormatError(`unknown cache tag '${String(t)}'`)
    }
    return t
  })

  const height = 140
  const svg = new Svg(WIDTH, height)
  const panel: Panel = { x: 40, y: 30, w: WIDTH - 80, h: 40 }
  const cell = panel.w / tags.length
  tags.forEach((tag, i) => {
    svg.rect(panel.x + i * cell, panel.y, cell, panel.h, TAG_COLORS[tag])
  })
  svg.rect(panel.x, panel.y, panel.w, panel.h, "none", "#333333")
  svg.text(panel.x, panel.y - 10, `cache table, step ${obj.T} (left) to 1 (right)`)
  Object.entries(TAG_COLORS).forEach(([tag, color], i) => {
    const x = panel.x + i * 110
    svg.rect(x, panel.y + panel.h + 24, 14, 10, color)
    svg.text(x + 20, panel.y + panel.h + 33, tag)
  })
  writeFileSync(outPath, svg.toString())
}
