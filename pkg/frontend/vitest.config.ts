import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    // the e2e test generates a dataset and trains for 20 epochs on CPU
    testTimeout: 1_800_000,
    hookTimeout: 120_000,
    pool: 'forks',
    maxConcurrency: 1,
    fileParallelism: false,
  },
});
