import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'happy-dom',
    include: ['tests/**/*.test.ts', 'e2e/**/*.test.ts'],
    testTimeout: 30000,
    hookTimeout: 90000,
    fileParallelism: false,
  },
});
