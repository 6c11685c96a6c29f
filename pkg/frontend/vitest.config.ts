import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'jsdom',
    include: ['tests/**/*.test.ts'],
    reporters: 'verbose',
    // keep the ACCEPTANCE lines visible on passing runs
    disableConsoleIntercept: true,
  },
});
