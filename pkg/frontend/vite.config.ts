/// <reference types="vitest/config" />
import { defineConfig } from "vite";

// /api is proxied to the Python review service so the UI stays same-origin.
const API = "http://127.0.0.1:8077";

export default defineConfig({
  build: { target: "es2022" },
  server: { proxy: { "/api": API } },
  preview: { proxy: { "/api": API } },
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    testTimeout: 15000,
    hookTimeout: 60000,
  },
});
