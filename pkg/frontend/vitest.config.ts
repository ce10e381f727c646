import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'jsdom',
    include: ['test/**/*.test.ts'],
    exclude: process.env.SHOWHIDE_E2E ? [] : ['test/flow.e2e.test.ts'],
    testTimeout: 30000,
    hookTimeout: 60000,
  },
});
