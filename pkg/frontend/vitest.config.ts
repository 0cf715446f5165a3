import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'node',
    // the session test spins up a real backend and walks two full batches
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
