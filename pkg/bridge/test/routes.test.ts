import type { Server } from "node:http";
import type { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { buildApp } from "../src/app.js";
import { loadConfig } from "../src/config.js";

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

async function postJson(
  base: string,
  path: string,
  body: unknown,
): Promise<{ status: number; body: any }> {
  const res = await fetch(`${base}${path}`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  return { status: res.status, body: await res.json() };
}

const IMAGE_B64 = Buffer.from("synthetic frame pixels").toString("base64");

const QA_PROMPT = [
  "Video v1 | duration 9s | resolution 320x240",
  "Event 1: frames 0s to 9s",
  "Frame @0s | Caption: the kettle near the counter | Triples: (none)",
  "Question: what is in the scene?",
  "Options:",
  "A. the kettle near the counter",
  "B. zebras grazing on xylophones",
  "Answer:",
].join("\n");

const INSTRUCTION_PROMPT = [
  "Task: propose a short grounding instruction.",
  "Event 2: frames 10s to 19s",
  "Frame @10s | Caption: the person wipes the counter | Triples: (person, near, counter)",
  "Frame @12s | Caption: the person wipes the counter slowly | Triples: (person, touching, counter)",
  "Instruction:",
].join("\n");

describe("default server", () => {
  let srv: Running;

  beforeAll(async () => {
    srv = await startServer();
  });
  afterAll(async () => {
    await srv.close();
  });

  it("embeds text deterministically at the advertised dimension", async () => {
    const first = await postJson(srv.base, "/v1/embed_text", { text: "wipe the counter" });
    const second = await postJson(srv.base, "/v1/embed_text", { text: "wipe the counter" });
    expect(first.status).toBe(200);
    expect(first.body.embedding).toHaveLength(64);
    expect(second.body.embedding).toEqual(first.body.embedding);
    const sq = first.body.embedding.reduce((acc: number, v: number) => acc + v * v, 0);
    expect(Math.abs(sq - 1)).toBeLessThan(1e-9);
  });

  it("embeds image bytes as a normalized histogram", async () => {
    // bytes 0x00 0x00 0x01 all land in bin 0
    const { status, body } = await postJson(srv.base, "/v1/embed_image", { image_b64: "AAAB" });
    expect(status).toBe(200);
    expect(body.embedding).toHaveLength(64);
    expect(body.embedding[0]).toBe(1);
    expect(body.embedding[1]).toBe(0);
  });

  it("matches healthz dims for both embedding routes", async () => {
    const health = await (await fetch(`${srv.base}/healthz`)).json();
    expect(health.status).toBe("ok");
    expect(health.dims.image).toBe(health.dims.text);
    expect(Object.keys(health.model_ids).sort()).toEqual([
      "caption",
      "complete",
      "embed_image",
      "embed_text",
      "oie",
      "scene_graph",
    ]);
    const image = await postJson(srv.base, "/v1/embed_image", { image_b64: IMAGE_B64 });
    const text = await postJson(srv.base, "/v1/embed_text", { text: "anything" });
    expect(image.body.embedding).toHaveLength(health.dims.image);
    expect(text.body.embedding).toHaveLength(health.dims.text);
  });

  it("captions an image with a stable non-empty sentence", async () => {
    const first = await postJson(srv.base, "/v1/caption", { image_b64: IMAGE_B64 });
    const second = await postJson(srv.base, "/v1/caption", { image_b64: IMAGE_B64 });
    expect(first.status).toBe(200);
    expect(typeof first.body.caption).toBe("string");
    expect(first.body.caption.length).toBeGreaterThan(0);
    expect(second.body.caption).toBe(first.body.caption);
  });

  it("returns well-formed scene graph triples", async () => {
    const { status, body } = await postJson(srv.base, "/v1/scene_graph", { image_b64: IMAGE_B64 });
    expect(status).toBe(200);
    expect(body.triples.length).toBeGreaterThanOrEqual(1);
    expect(body.triples.length).toBeLessThanOrEqual(3);
    for (const triple of body.triples) {
      expect(triple.predicate.length).toBeGreaterThan(0);
      expect(triple.confidence).toBeGreaterThanOrEqual(0);
      expect(triple.confidence).toBeLessThanOrEqual(1);
      for (const entity of [triple.subject, triple.object]) {
        expect(entity.label.length).toBeGreaterThan(0);
        const [x1, y1, x2, y2] = entity.box;
        expect(x1).toBeGreaterThanOrEqual(0);
        expect(y1).toBeGreaterThanOrEqual(0);
        expect(x2).toBeGreaterThan(x1);
        expect(y2).toBeGreaterThan(y1);
        expect(x2).toBeLessThanOrEqual(16);
        expect(y2).toBeLessThanOrEqual(16);
      }
    }
  });

  it("splits clauses into subject/relation tuples", async () => {
    const { body } = await postJson(srv.base, "/v1/oie", {
      text: "The person lifts the kettle and pours water.",
    });
    expect(body.tuples).toEqual([
      ["the", "person", "lifts the kettle"],
      ["pours", "water"],
    ]);
  });

  it("answers a multiple-choice prompt with the grounded letter", async () => {
    const { status, body } = await postJson(srv.base, "/v1/complete", {
      prompt: QA_PROMPT,
      max_tokens: 8,
      temperature: 0,
    });
    expect(status).toBe(200);
    expect(body.text).toBe("A");
  });

  it("proposes an instruction from repeated caption words", async () => {
    const { body } = await postJson(srv.base, "/v1/complete", {
      prompt: INSTRUCTION_PROMPT,
      max_tokens: 16,
      temperature: 0,
    });
    expect(body.text).toBe("describe the counter and the wipes");
  });

  it("applies max_tokens and stop sequences to completions", async () => {
    const truncated = await postJson(srv.base, "/v1/complete", {
      prompt: INSTRUCTION_PROMPT,
      max_tokens: 2,
      temperature: 0,
    });
    expect(truncated.body.text).toBe("describe the");
    const stopped = await postJson(srv.base, "/v1/complete", {
      prompt: INSTRUCTION_PROMPT,
      max_tokens: 16,
      temperature: 0,
      stop: ["counter"],
    });
    expect(stopped.body.text).toBe("describe the");
  });

  it("falls back to a generic continuation for free-form prompts", async () => {
    const { body } = await postJson(srv.base, "/v1/complete", {
      prompt: "hello world",
      max_tokens: 16,
      temperature: 0,
    });
    expect(body.text).toBe("the scene continues");
  });

  it("rejects malformed request shapes", async () => {
    const missing = await postJson(srv.base, "/v1/embed_text", {});
    expect(missing.status).toBe(400);
    expect(missing.body.error.type).toBe("invalid_request");
    const extra = await postJson(srv.base, "/v1/embed_text", { text: "x", bogus: 1 });
    expect(extra.status).toBe(400);
    const untyped = await postJson(srv.base, "/v1/complete", { prompt: "x", max_tokens: 4 });
    expect(untyped.status).toBe(400);
  });

  it("rejects a body that is not JSON", async () => {
    const res = await fetch(`${srv.base}/v1/embed_text`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: "{not json",
    });
    expect(res.status).toBe(400);
    const body = await res.json();
    expect(body.error.type).toBe("invalid_request");
  });

  it("rejects invalid base64 payloads", async () => {
    const { status, body } = await postJson(srv.base, "/v1/embed_image", { image_b64: "!!!" });
    expect(status).toBe(400);
    expect(body.error.type).toBe("invalid_request");
  });

  it("404s unknown routes", async () => {
    const post = await postJson(srv.base, "/v1/telepathy", {});
    expect(post.status).toBe(404);
    expect(post.body.error.type).toBe("unknown_route");
    const get = await fetch(`${srv.base}/v1/embed_text`);
    expect(get.status).toBe(404);
  });

  it("serves concurrent requests consistently", async () => {
    const results = await Promise.all(
      Array.from({ length: 16 }, () =>
        postJson(srv.base, "/v1/embed_text", { text: "parallel probe" }),
      ),
    );
    for (const result of results) {
      expect(result.status).toBe(200);
      expect(result.body.embedding).toEqual(results[0].body.embedding);
    }
  });
});

describe("configured variants", () => {
  it("404s a disabled route and drops it from healthz", async () => {
    const srv = await startServer({ BRIDGE_DISABLED: "caption" });
    try {
      const { status, body } = await postJson(srv.base, "/v1/caption", { image_b64: IMAGE_B64 });
      expect(status).toBe(404);
      expect(body.error.type).toBe("disabled_route");
      const health = await (await fetch(`${srv.base}/healthz`)).json();
      expect(Object.keys(health.model_ids)).not.toContain("caption");
      expect(Object.keys(health.model_ids)).toHaveLength(5);
      const alive = await postJson(srv.base, "/v1/embed_text", { text: "still on" });
      expect(alive.status).toBe(200);
    } finally {
      await srv.close();
    }
  });

  it("413s prompts beyond the configured context budget", async () => {
    const srv = await startServer({ BRIDGE_CONTEXT_LIMIT: "5" });
    try {
      const { status, body } = await postJson(srv.base, "/v1/complete", {
        prompt: "one two three four five six seven eight nine ten",
        max_tokens: 4,
        temperature: 0,
      });
      expect(status).toBe(413);
      expect(body.error.type).toBe("context_overflow");
    } finally {
      await srv.close();
    }
  });
});
