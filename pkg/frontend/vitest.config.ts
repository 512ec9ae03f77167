import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 40000,
    hookTimeout: 45000,
    // the e2e suite owns a single spawned gateway; keep files sequential
    fileParallelism: false,
  },
});
