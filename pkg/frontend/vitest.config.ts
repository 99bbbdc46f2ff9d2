import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    globalSetup: "./test/globalSetup.ts",
    // Both servers are shared fixtures; run files one at a time so project
    // numbering on the replay server stays predictable.
    fileParallelism: false,
    testTimeout: 60_000,
    hookTimeout: 180_000
  }
});
