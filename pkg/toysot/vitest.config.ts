import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // The gradient check and the overfit demonstration are long-running
    // numerical tests; per-test timeouts are set where needed.
    testTimeout: 30_000,
    hookTimeout: 120_000,
    pool: "forks",
  },
});
