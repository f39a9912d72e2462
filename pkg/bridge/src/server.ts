// Entry point: resolve config from the environment and serve.

import { buildApp } from "./app.js";
import { describeConfig, loadConfig } from "./config.js";

function main(): void {
  let config;
  try {
    config = loadConfig(process.env);
  } catch (err) {
    console.error(`bridge startup failed: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
  const app = buildApp(config);
  const server = app.listen(config.port, config.host, () => {
    const address = server.address();
    const port = typeof address === "object" && address !== null ? address.port : config.port;
    console.log(`bridge config ${JSON.stringify(describeConfig(config))}`);
    console.log(`bridge listening on http://${config.host}:${port}`);
  });
  const shutdown = () => {
    server.close(() => process.exit(0));
  };
  process.on("SIGINT", shutdown);
  process.on("SIGTERM", shutdown);
}

main();
