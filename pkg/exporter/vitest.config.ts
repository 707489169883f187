import { defineConfig } from 'vitest/config';

// training the fixture model on the pure-JS backend dominates the suite,
// so the per-test budget is generous on purpose
export default defineConfig({
  test: {
    testTimeout: 240_000,
    hookTimeout: 420_000,
  },
});
