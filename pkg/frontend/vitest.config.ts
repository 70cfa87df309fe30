import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // parity tests shell out to the CLI many times
    testTimeout: 600_000,
    hookTimeout: 600_000,
  },
});
