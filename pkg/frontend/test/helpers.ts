/** Shared synthetic fixtures for the training and CLI tests. */

export interface OverfitSample {
  size: number;
  /** Volts, two-level: 0.4 background with a 1.0 hotspot patch. */
  gold: Float32Array;
  /**
   * Three channels [C,H,W]: x ramp, y ramp, and the z-scored gold itself,
   * so a pass-through mapping exists and the overfit target is reachable.
   */
  channels: Float32Array;
}

export function makeOverfitSample(size = 32): OverfitSample {
  const n = size * size;
  const gold = new Float32Array(n).fill(0.4);
  const i0 = Math.floor(size * 0.6);
  const i1 = Math.floor(size * 0.85);
  const j0 = Math.floor(size * 0.2);
  const j1 = Math.floor(size * 0.45);
  for (let i = i0; i < i1; i++) for (let j = j0; j < j1; j++) gold[i * size + j] = 1.0;

  let mean = 0;
  for (const v of gold) mean += v;
  mean /= n;
  let sq = 0;
  for (const v of gold) sq += (v - mean) * (v - mean);
  const std = Math.sqrt(sq / n);

  const channels = new Float32Array(3 * n);
  for (let i = 0; i < size; i++) {
    for (let j = 0; j < size; j++) {
      channels[0 * n + i * size + j] = i / size;
      channels[1 * n + i * size + j] = j / size;
      channels[2 * n + i * size + j] = (gold[i * size + j] - mean) / std;
    }
  }
  return { size, gold, channels };
}

/** Deterministic uniform noise in [-1, 1), good enough for fixtures. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return (((t ^ (t >>> 14)) >>> 0) / 4294967296) * 2 - 1;
  };
}
