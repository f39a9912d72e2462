// Golden-file contract check: every route response must validate against
// the shared wire schemas used by the engine client.

import { readFileSync } from "node:fs";
import type { Server } from "node:http";
import type { AddressInfo } from "node:net";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import AjvImport from "ajv/dist/2020.js";

import { buildApp } from "../src/app.js";
import { loadConfig } from "../src/config.js";

const Ajv2020: any = (AjvImport as any).default ?? AjvImport;

const SCHEMA_DIR = path.resolve(
  path.dirname(fileURLToPath(import.meta.url)),
  "..",
  "..",
  "schemas",
);

const ajv = new Ajv2020({ allErrors: true });

function validator(fileName: string) {
  const schema = JSON.parse(readFileSync(path.join(SCHEMA_DIR, fileName), "utf-8"));
  return ajv.compile(schema);
}

function check(fileName: string, payload: unknown): void {
  const validate = validator(fileName);
  const ok = validate(payload);
  expect(ok, `${fileName}: ${JSON.stringify(validate.errors)}`).toBe(true);
}

interface Running {
  base: string;
  close: () => Promise<void>;
}

async function startServer(env: NodeJS.ProcessEnv = {}): Promise<Running> {
  const app = buildApp(loadConfig(env));
  const server: Server = app.listen(0, "127.0.0.1");
  await new Promise<void>((resolve, reject) => {
    server.once("listening", resolve);
    server.once("error", reject);
  });
  const { port } = server.address() as AddressInfo;
  return {
    base: `http://127.0.0.1:${port}`,
    close: () =>
      new Promise<void>((resolve, reject) => {
        server.close((err) => (err ? reject(err) : resolve()));
      }),
  };
}

async function post(
  base: string,
  route: string,
  body: unknown,
): Promise<{ status: number; body: any }> {
  const res = await fetch(`${base}/v1/${route}`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  return { status: res.status, body: await res.json() };
}

const IMAGE_B64 = Buffer.from("schema probe frame").toString("base64");

const ROUTE_REQUESTS: Record<string, unknown> = {
  embed_image: { image_b64: IMAGE_B64 },
  embed_text: { text: "the person folds the cloth" },
  caption: { image_b64: IMAGE_B64, model_id: "template-captioner-1" },
  scene_graph: { image_b64: IMAGE_B64 },
  oie: { text: "the person opens the drawer and closes the window" },
  complete: {
    prompt: "Frame @0s | Caption: the cloth on the shelf | Triples: (none)\nInstruction:",
    max_tokens: 16,
    temperature: 0,
    stop: [],
  },
};

describe("wire schema conformance", () => {
  let srv: Running;

  beforeAll(async () => {
    srv = await startServer();
  });
  afterAll(async () => {
    await srv.close();
  });

  for (const route of Object.keys(ROUTE_REQUESTS)) {
    it(`validates the ${route} round trip`, async () => {
      const request = ROUTE_REQUESTS[route];
      check(`${route}.request.json`, request);
      const { status, body } = await post(srv.base, route, request);
      expect(status).toBe(200);
      check(`${route}.response.json`, body);
    });
  }

  it("validates shape-rejection errors", async () => {
    const { status, body } = await post(srv.base, "embed_text", { nonsense: true });
    expect(status).toBe(400);
    check("error.response.json", body);
  });

  it("validates unknown-route errors", async () => {
    const { status, body } = await post(srv.base, "no_such_tool", {});
    expect(status).toBe(404);
    check("error.response.json", body);
  });
});

describe("wire schema conformance for configured servers", () => {
  it("validates disabled-route errors", async () => {
    const srv = await startServer({ BRIDGE_DISABLED: "oie" });
    try {
      const { status, body } = await post(srv.base, "oie", { text: "ignored" });
      expect(status).toBe(404);
      check("error.response.json", body);
    } finally {
      await srv.close();
    }
  });

  it("validates context-overflow errors", async () => {
    const srv = await startServer({ BRIDGE_CONTEXT_LIMIT: "3" });
    try {
      const { status, body } = await post(srv.base, "complete", {
        prompt: "alpha beta gamma delta epsilon",
        max_tokens: 4,
        temperature: 0,
      });
      expect(status).toBe(413);
      check("error.response.json", body);
    } finally {
      await srv.close();
    }
  });
});
