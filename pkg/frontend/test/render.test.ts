import { mkdtempSync, readFileSync, writeFileSync } from "node:fs"
import { tmpdir } from "node:os"
import { join } from "node:path"
import { beforeAll, describe, expect, it } from "vitest"

import { main } from "../src/cli.js"
import { FormatError, fileStem, parseCsv } from "../src/csv.js"

let dir: string

const SNR_CSV = [
  "# config=0123456789abcdef",
  "step,snr",
  "10,6.034568578271979",
  "9,8.305734564789525",
  "8,12.49",
  "7,30.1",
  "6,45.2",
  "5,120.0",
  "4,ölmö".replace("ölmö", "310.5"),
  "3,900.2",
  "2,2500.0",
  "1,10000.0",
].join("\n")

const BANDS_CSV = [
  "# config=0123456789abcdef",
  "step,low_l2,high_l2",
  "10,0.53,3.17",
  "9,0.61,3.02",
  "8,0.75,2.80",
  "7,0.91,2.55",
  "6,1.10,2.30",
].join("\n")

const TABLE_JSON = JSON.stringify({
  T: 10,
  tags: ["none", "none", "mlp", "both", "mlp", "none", "attn", "both", "attn", "none"],
})

beforeAll(() => {
  dir = mkdtempSync(join(tmpdir(), "plots-"))
  writeFileSync(join(dir, "snr_a.csv"), SNR_CSV)
  writeFileSync(join(dir, "snr_b.csv"), SNR_CSV.replace("6.034", "7.034"))
  writeFileSync(join(dir, "bands.csv"), BANDS_CSV)
  writeFileSync(join(dir, "table.json"), TABLE_JSON)
  writeFileSync(join(dir, "empty.csv"), "# config=x\nstep,snr\n")
  writeFileSync(join(dir, "wrong_header.csv"), "step,value\n1,2\n")
  writeFileSync(join(dir, "bad_table.json"), '{"T": 3, "tags": ["none", "wat", "none"]}')
})

describe("parseCsv", () => {
  it("skips comments and checks the header", () => {
    const t = parseCsv(SNR_CSV, "step,snr")
    expect(t.columns).toEqual(["step", "snr"])
    expect(t.rows).toHaveLength(10)
    expect(t.rows[0]).toEqual([10, 6.034568578271979])
  })

  it("rejects a wrong header", () => {
    expect(() => parseCsv("a,b\n1,2\n", "step,snr")).toThrow(FormatError)
  })

  it("rejects an empty body", () => {
    expect(() => parseCsv("step,snr\n", "step,snr")).toThrow(FormatError)
  })

  it("derives legend labels from file stems", () => {
    expect(fileStem("/x/y/snr_base.csv")).toBe("snr_base")
  })
})

describe("render snr", () => {
  it("writes an SVG for one input", () => {
    const out = join(dir, "snr1.svg")
    expect(main(["render", "snr", "--in", join(dir, "snr_a.csv"), "--out", out])).toBe(0)
    const svg = readFileSync(out, "utf8")
    expect(svg.startsWith("<svg")).toBe(true)
    expect(svg.length).toBeGreaterThan(200)
  })

  it("puts one legend entry per input", () => {
    const out = join(dir, "snr2.svg")
    const code = main([
      "render", "snr",
      "--in", `${join(dir, "snr_a.csv")},${join(dir, "snr_b.csv")}`,
      "--out", out,
    ])
    expect(code).toBe(0)
    const svg = readFileSync(out, "utf8")
    expect(svg).toContain(">snr_a</text>")
    expect(svg).toContain(">snr_b</text>")
    expect((svg.match(/<polyline/g) ?? []).length).toBe(2)
  })

  it("fails on an empty CSV", () => {
    expect(main(["render", "snr", "--in", join(dir, "empty.csv"), "--out", join(dir, "x.svg")])).not.toBe(0)
  })

  it("fails on a malformed header", () => {
    expect(
      main(["render", "snr", "--in", join(dir, "wrong_header.csv"), "--out", join(dir, "x.svg")]),
    ).not.toBe(0)
  })

  it("is byte-stable across reruns", () => {
    const a = join(dir, "stable_a.svg")
    const b = join(dir, "stable_b.svg")
    main(["render", "snr", "--in", join(dir, "snr_a.csv"), "--out", a])
    main(["render", "snr", "--in", join(dir, "snr_a.csv"), "--out", b])
    expect(readFileSync(a, "utf8")).toBe(readFileSync(b, "utf8"))
  })
})

describe("render bands", () => {
  it("draws two panels", () => {
    const out = join(dir, "bands.svg")
    expect(main(["render", "bands", "--in", join(dir, "bands.csv"), "--out", out])).toBe(0)
    const svg = readFileSync(out, "utf8")
    expect(svg).toContain("low band L2")
    expect(svg).toContain("high band L2")
  })

  it("fails on the snr header", () => {
    expect(
      main(["render", "bands", "--in", join(dir, "snr_a.csv"), "--out", join(dir, "x.svg")]),
    ).not.toBe(0)
  })

  it("is byte-stable across reruns", () => {
    const a = join(dir, "bands_a.svg")
    const b = join(dir, "bands_b.svg")
    main(["render", "bands", "--in", join(dir, "bands.csv"), "--out", a])
    main(["render", "bands", "--in", join(dir, "bands.csv"), "--out", b])
    expect(readFileSync(a, "utf8")).toBe(readFileSync(b, "utf8"))
  })
})

describe("render table", () => {
  it("draws one cell per step plus a legend", () => {
    const out = join(dir, "table.svg")
    expect(main(["render", "table", "--in", join(dir, "table.json"), "--out", out])).toBe(0)
    const svg = readFileSync(out, "utf8")
    // 10 step cells + background + frame + 4 legend swatches
    expect((svg.match(/<rect/g) ?? []).length).toBe(16)
  })

  it("single-tag table renders a single-color strip", () => {
    const mono = join(dir, "mono.json")
    writeFileSync(mono, JSON.stringify({ T: 4, tags: ["none", "none", "none", "none"] }))
    const out = join(dir, "mono.svg")
    expect(main(["render", "table", "--in", mono, "--out", out])).toBe(0)
    const svg = readFileSync(out, "utf8")
    expect((svg.match(/#bdbdbd/g) ?? []).length).toBe(5) // 4 cells + legend swatch
  })

  it("fails on an unknown tag", () => {
    expect(
      main(["render", "table", "--in", join(dir, "bad_table.json"), "--out", join(dir, "x.svg")]),
    ).not.toBe(0)
  })

  it("fails on invalid JSON", () => {
    const broken = join(dir, "broken.json")
    writeFileSync(broken, "{not json")
    expect(main(["render", "table", "--in", broken, "--out", join(dir, "x.svg")])).not.toBe(0)
  })
})

describe("cli", () => {
  it("usage errors exit 1", () => {
    expect(main([])).toBe(1)
    expect(main(["render", "nope", "--in", "x", "--out", "y"])).toBe(1)
    expect(main(["render", "snr", "--in", "x.csv"])).toBe(1)
  })

  it("missing input file exits 2", () => {
    expect(main(["render", "snr", "--in", join(dir, "missing.csv"), "--out", join(dir, "x.svg")])).toBe(2)
  })
})
