// Corpus access layer: manifest, annotations, snapshots, and the scproof CLI.
// The harness consumes the analyzer strictly through its external surfaces:
// the fixture directory layout, the CLI subcommands, and the report JSON.

import { spawnSync } from "node:child_process";
import { readFileSync, existsSync } from "node:fs";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

export const CORPUS_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");
export const REPO_ROOT = resolve(CORPUS_ROOT, "..");
export const STUB_DIR = join(REPO_ROOT, "tests", "data", "stubs");

export const ALL_KINDS = [
  "Reentrancy",
  "ComplexFallback",
  "AccessControl",
  "BlockEnvDependency",
  "InsufficientParamValidation",
  "FaultyAssertRevert",
  "DivisionByZero",
] as const;

export type DefectKind = (typeof ALL_KINDS)[number];

// kinds whose proof templates ship with the analyzer
export const TEMPLATED_KINDS: DefectKind[] = [
  "Reentrancy",
  "ComplexFallback",
  "AccessControl",
  "InsufficientParamValidation",
  "DivisionByZero",
];

export interface KvDoc {
  top: Record<string, string>;
  groups: Array<{ name: string; body: Record<string, string> }>;
}

export function parseKv(text: string): KvDoc {
  const doc: KvDoc = { top: {}, groups: [] };
  let current: Record<string, string> | null = null;
  for (const raw of text.split(/\r?\n/)) {
    const line = raw.trim();
    if (!line || line.startsWith("#")) continue;
    if (line.startsWith("[") && line.endsWith("]")) {
      current = {};
      doc.groups.push({ name: line.slice(1, -1).trim(), body: current });
      continue;
    }
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`expected 'key = value', got: ${raw}`);
    const key = line.slice(0, eq).trim();
    const value = line.slice(eq + 1).trim();
    (current ?? doc.top)[key] = value;
  }
  return doc;
}

export function sections(doc: KvDoc, name: string): Array<Record<string, string>> {
  return doc.groups.filter((g) => g.name === name).map((g) => g.body);
}

export interface FixturePair {
  kind: DefectKind;
  dir: string;
  contract: string;
  vulnerableSource: string;
  safeSource: string;
  annotations: string;
  vulnerableAst: string;
  safeAst: string;
}

export function corpusManifest(): FixturePair[] {
  const doc = parseKv(readFileSync(join(CORPUS_ROOT, "corpus.manifest"), "utf-8"));
  return sections(doc, "pair").map((body) => {
    const dir = join(CORPUS_ROOT, body.dir);
    return {
      kind: body.kind as DefectKind,
      dir: body.dir,
      contract: body.contract,
      vulnerableSource: join(dir, "vulnerable.sol"),
      safeSource: join(dir, "safe.sol"),
      annotations: join(dir, "annotations.txt"),
      vulnerableAst: join(dir, "ast", "vulnerable.json"),
      safeAst: join(dir, "ast", "safe.json"),
    };
  });
}

export function corpusPragma(): string {
  const doc = parseKv(readFileSync(join(CORPUS_ROOT, "corpus.manifest"), "utf-8"));
  return doc.top.pragma;
}

export function pairFiles(pair: FixturePair): string[] {
  return [
    pair.vulnerableSource,
    pair.safeSource,
    pair.annotations,
    pair.vulnerableAst,
    pair.safeAst,
  ];
}

export function fileExists(path: string): boolean {
  return existsSync(path);
}

// --- scproof CLI ------------------------------------------------------------

export interface Finding {
  contract: string;
  defect_kind: string;
  verdict: string;
  confidence: string;
  evidence: null | {
    kind: string;
    contract: string;
    sites: Array<{ function: string; statement_index: number; tag: string }>;
    gating_facts: Record<string, string>;
  };
  tests: Array<{ method: string; role: string; backend: string; status: string }>;
  notes: string[];
}

export interface ScanReport {
  schema_version: string;
  tool_version: string;
  findings: Finding[];
  inputs: Array<{ file: string; contract: string }>;
  artifacts: string[];
}

export interface CliResult {
  status: number;
  report: ScanReport;
  stderr: string;
}

export function runScproof(args: string[]): CliResult {
  const proc = spawnSync("scproof", [...args, "--format", "json"], {
    encoding: "utf-8",
    maxBuffer: 16 * 1024 * 1024,
  });
  if (proc.error) throw proc.error;
  let report: ScanReport;
  try {
    report = JSON.parse(proc.stdout) as ScanReport;
  } catch (err) {
    throw new Error(
      `scproof ${args.join(" ")} produced unparseable output ` +
        `(exit ${proc.status}): ${proc.stdout.slice(0, 400)} ${proc.stderr.slice(0, 400)}`,
    );
  }
  return { status: proc.status ?? -1, report, stderr: proc.stderr };
}

export function detect(snapshotPath: string): CliResult {
  return runScproof(["detect", snapshotPath]);
}

// --- snapshot shape -----------------------------------------------------------

export interface SnapshotSource {
  id: number;
  ast: { nodeType: string; absolutePath: string; src: string; nodes: unknown[] };
}

export function loadSnapshot(path: string): Record<string, SnapshotSource> {
  const parsed = JSON.parse(readFileSync(path, "utf-8"));
  if (typeof parsed !== "object" || parsed === null || !("sources" in parsed)) {
    throw new Error(`${path}: not a standard-JSON compiler output`);
  }
  return (parsed as { sources: Record<string, SnapshotSource> }).sources;
}

export function collectSrcSpans(node: unknown, spans: string[] = []): string[] {
  if (Array.isArray(node)) {
    for (const item of node) collectSrcSpans(item, spans);
  } else if (typeof node === "object" && node !== null) {
    const record = node as Record<string, unknown>;
    if (typeof record.src === "string") spans.push(record.src);
    for (const value of Object.values(record)) collectSrcSpans(value, spans);
  }
  return spans;
}

// --- minimal-diff check ------------------------------------------------------

/**
 * True when the two texts differ only in one small contiguous region: after
 * trimming the maximal common line prefix and suffix, what remains on either
 * side fits in `maxHunkLines`.
 */
export function minimalDiff(a: string, b: string, maxHunkLines = 6): boolean {
  const left = a.split("\n");
  const right = b.split("\n");
  let prefix = 0;
  while (prefix < left.length && prefix < right.length && left[prefix] === right[prefix]) {
    prefix += 1;
  }
  let suffix = 0;
  while (
    suffix < left.length - prefix &&
    suffix < right.length - prefix &&
    left[left.length - 1 - suffix] === right[right.length - 1 - suffix]
  ) {
    suffix += 1;
  }
  const middleLeft = left.length - prefix - suffix;
  const middleRight = right.length - prefix - suffix;
  return Math.max(middleLeft, middleRight) <= maxHunkLines;
}
