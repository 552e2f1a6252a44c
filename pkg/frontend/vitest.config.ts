import { defineConfig } from "vitest/config";

// single-core container: run files sequentially, and give the training
// tests room — tfjs on the pure-JS CPU backend is slow per step
export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    fileParallelism: false,
    pool: "forks",
    testTimeout: 600_000,
    hookTimeout: 120_000,
  },
});
