/**
 * Reader for the engine's CSV reports.
 *
 * Files start with zero or more `#` comment lines (the first records the
 * config hash), then a header row, then numeric rows.  The expected
 * header is checked exactly; anything else is a format error.
 */

export class FormatError extends Error {}

export interface Table {
  /** column names, from the header row */
  columns: string[]
  /** one entry per data row, aligned with columns */
  rows: number[][]
}

export function parseCsv(text: string, expectedHeader: string): Table {
  const lines = text.split(/\r?\n/).filter(line => line.length > 0)
  let i = 0
  while (i < lines.length && lines[i].startsWith("#")) {
    i++
  }
  if (i >= lines.length) {
    throw new FormatError("CSV has no header row")
  }
  const header = lines[i]
  if (header !== expectedHeader) {
    throw new FormatError(`expected header '${expectedHeader}', got '${header}'`)
  }
  const columns = header.split(",")
  const rows: number[][] = []
  for (const line of lines.slice(i + 1)) {
    const cells = line.split(",")
    if (cells.length !== columns.length) {
      throw new FormatError(`row has ${cells.length} cells, header has ${columns.length}`)
    }
    const row = cells.map(c => Number(c))
    if (row.some(v => Number.isNaN(v))) {
      throw new FormatError(`non-numeric cell in row '${line}'`)
    }
    rows.push(row)
  }
  if (rows.length === 0) {
    throw new FormatError("CSV has no data rows")
  }
  return { columns, rows }
}

/** Legend label for a CSV path: the file name without extension. */
export function fileStem(path: string): string {
  const base = path.split("/").pop() ?? path
  const dot = base.lastIndexOf(".")
  return dot > 0 ? base.slice(0, dot) : base
}
