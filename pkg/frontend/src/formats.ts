/**
 * Readers/writers for the grid files and channel manifests produced by the
 * feature-extraction CLI.
 *
 * SGRD layout: 4-byte magic "SGRD", u32 width, u32 height (little-endian),
 * width*height float32 values in row-major order, then a trailing UTF-8
 * units tag running to end of file.
 */
import * as fs from "node:fs";
import * as path from "node:path";

export interface Grid {
  width: number;
  height: number;
  /** Row-major, length width*height. */
  values: Float32Array;
  units: string;
}

const MAGIC = "SGRD";

export function readSgrd(file: string): Grid {
  const buf = fs.readFileSync(file);
  if (buf.length < 12 || buf.toString("latin1", 0, 4) !== MAGIC) {
    throw new Error(`${file}: not an SGRD file`);
  }
  const width = buf.readUInt32LE(4);
  const height = buf.readUInt32LE(8);
  const nbytes = width * height * 4;
  if (buf.length < 12 + nbytes) {
    throw new Error(`${file}: truncated SGRD payload`);
  }
  // copy out of the (possibly unaligned) read buffer before the f32 view
  const bytes = new Uint8Array(nbytes);
  bytes.set(buf.subarray(12, 12 + nbytes));
  const values = new Float32Array(bytes.buffer);
  const units = buf.toString("utf8", 12 + nbytes) || "dimensionless";
  return { width, height, values, units };
}

export function writeSgrd(file: string, grid: Grid): void {
  const header = Buffer.alloc(12);
  header.write(MAGIC, 0, "latin1");
  header.writeUInt32LE(grid.width, 4);
  header.writeUInt32LE(grid.height, 8);
  const payload = Buffer.from(
    grid.values.buffer,
    grid.values.byteOffset,
    grid.values.byteLength,
  );
  fs.writeFileSync(file, Buffer.concat([header, payload, Buffer.from(grid.units, "utf8")]));
}

export function readCsvGrid(file: string, units = "dimensionless"): Grid {
  const rows = fs
    .readFileSync(file, "utf8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => line.split(",").map(Number));
  const height = rows.length;
  if (height === 0) throw new Error(`${file}: empty grid`);
  const width = rows[0].length;
  const values = new Float32Array(width * height);
  rows.forEach((row, i) => {
    if (row.length !== width) throw new Error(`${file}: ragged row ${i}`);
    values.set(row, i * width);
  });
  return { width, height, values, units };
}

export function writeCsvGrid(file: string, grid: Grid): void {
  const lines: string[] = [];
  for (let i = 0; i < grid.height; i++) {
    const row = grid.values.subarray(i * grid.width, (i + 1) * grid.width);
    lines.push(Array.from(row, (v) => String(v)).join(","));
  }
  fs.writeFileSync(file, lines.join("\n") + "\n");
}

export function readGrid(file: string): Grid {
  const ext = path.extname(file).toLowerCase();
  if (ext === ".sgrd") return readSgrd(file);
  if (ext === ".csv") return readCsvGrid(file);
  throw new Error(`${file}: unknown grid format (expected .sgrd or .csv)`);
}

export interface ChannelEntry {
  name: string;
  file: string;
  /** Native-resolution statistics recorded at export time. */
  mean: number;
  std: number;
}

/** Parse a `name,file,mean,std` channel manifest (no header line). */
export function readManifest(file: string): ChannelEntry[] {
  const entries: ChannelEntry[] = [];
  for (const raw of fs.readFileSync(file, "utf8").split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    const parts = line.split(",");
    if (parts.length !== 4) throw new Error(`${file}: bad manifest line: ${line}`);
    entries.push({
      name: parts[0],
      file: parts[1],
      mean: Number(parts[2]),
      std: Number(parts[3]),
    });
  }
  if (entries.length === 0) throw new Error(`${file}: empty manifest`);
  return entries;
}

export interface Stack {
  entries: ChannelEntry[];
  grids: Grid[];
  width: number;
  height: number;
}

/** Load every channel named by a manifest; all grids must share one shape. */
export function loadStack(manifestPath: string): Stack {
  const entries = readManifest(manifestPath);
  const dir = path.dirname(manifestPath);
  const grids = entries.map((e) => readGrid(path.join(dir, e.file)));
  const { width, height } = grids[0];
  for (let i = 1; i < grids.length; i++) {
    if (grids[i].width !== width || grids[i].height !== height) {
      throw new Error(
        `${entries[i].file}: shape ${grids[i].width}x${grids[i].height} != ${width}x${height}`,
      );
    }
  }
  return { entries, grids, width, height };
}
