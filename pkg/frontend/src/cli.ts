#!/usr/bin/env node
/**
 * plots render <snr|bands|table> --in a.csv[,b.csv ...] --out figure.svg
 *
 * Exit codes: 0 ok, 1 usage or malformed input, 2 IO error.
 */
import { FormatError } from "./csv.js"
import { renderBands, renderSnr, renderTable } from "./render.js"

function usage(): string {
  return "usage: plots render <snr|bands|table> --in <file>[,<file>...] --out <file.svg>"
}

export function main(argv: string[]): number {
  if (argv.length < 2 || argv[0] !== "render") {
    console.error(usage())
    return 1
  }
  const kind = argv[1]
  const inputs: string[] = []
  let out: string | undefined
  for (let i = 2; i < argv.length; i++) {
    if (argv[i] === "--in" && i + 1 < argv.length) {
      inputs.push(...argv[++i].split(","))
    } else if (argv[i] === "--out" && i + 1 < argv.length) {
      out = argv[++i]
    } else {
      console.error(`unknown argument '${argv[i]}'\n${usage()}`)
      return 1
    }
  }
  if (inputs.length === 0 || out === undefined) {
    console.error(usage())
    return 1
  }
  try {
    if (kind === "snr") {
      renderSnr(inputs, out)
    } else if (kind === "bands") {
      renderBands(inputs, out)
    } else if (kind === "table") {
      if (inputs.length !== 1) {
        console.error("table rendering takes exactly one JSON input")
        return 1
      }
      renderTable(inputs[0], out)
    } else {
      console.error(`unknown figure kind '${kind}'\n${usage()}`)
      return 1
    }
  } catch (e) {
    if (e instanceof FormatError) {
      console.error(`format error: ${e.message}`)
      return 1
    }
    if (e instanceof Error && "code" in e) {
      console.error(`io error: ${e.message}`)
      return 2
    }
    throw e
  }
  console.log(`wrote ${out}`)
  return 0
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)))
}
