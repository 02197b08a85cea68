import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    // The end-to-end suite drives a real serve-mode child process.
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
