import { defineConfig } from "vite";

export default defineConfig({
  build: { outDir: "dist", sourcemap: true },
  test: {
    environment: "jsdom",
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
