// Express app exposing the six provider routes plus /healthz.

import express, { type Express, type Request, type Response, type NextFunction } from "express";
import type { ZodType } from "zod";

import { type BridgeConfig, type Tool } from "./config.js";
import { EMBEDDING_DIM, embedImageBytes, embedText } from "./features.js";
import {
  ContextOverflowError,
  caption,
  complete,
  extractTuples,
  sceneGraph,
} from "./language.js";
import {
  InvalidBase64Error,
  completeRequest,
  decodeBase64,
  imageRequest,
  textRequest,
} from "./protocol.js";

function sendError(res: Response, status: number, type: string, message: string): void {
  res.status(status).json({ error: { type, message } });
}

export function buildApp(config: BridgeConfig): Express {
  const app = express();
  app.use(express.json({ limit: "16mb" }));

  const route = <T>(
    tool: Tool,
    schema: ZodType<T>,
    handler: (body: T) => unknown,
  ) => {
    app.post(`/v1/${tool}`, (req: Request, res: Response) => {
      if (config.disabled.has(tool)) {
        sendError(res, 404, "disabled_route", `route ${tool} is disabled`);
        return;
      }
      const parsed = schema.safeParse(req.body);
      if (!parsed.success) {
        sendError(res, 400, "invalid_request", parsed.error.issues[0]?.message ?? "bad request");
        return;
      }
      try {
        res.json(handler(parsed.data));
      } catch (err) {
        if (err instanceof ContextOverflowError) {
          sendError(res, 413, "context_overflow", err.message);
        } else if (err instanceof InvalidBase64Error) {
          sendError(res, 400, "invalid_request", err.message);
        } else {
          sendError(res, 500, "internal", String(err));
        }
      }
    });
  };

  route("embed_image", imageRequest, (body) => ({
    embedding: embedImageBytes(decodeBase64(body.image_b64)),
  }));
  route("embed_text", textRequest, (body) => ({ embedding: embedText(body.text) }));
  route("caption", imageRequest, (body) => ({
    caption: caption(decodeBase64(body.image_b64)),
  }));
  route("scene_graph", imageRequest, (body) => ({
    triples: sceneGraph(decodeBase64(body.image_b64)),
  }));
  route("oie", textRequest, (body) => ({ tuples: extractTuples(body.text) }));
  route("complete", completeRequest, (body) => ({
    text: complete(body.prompt, body.max_tokens, body.stop ?? [], config.contextLimit),
  }));

  app.get("/healthz", (_req: Request, res: Response) => {
    const modelIds: Record<string, string> = {};
    for (const [tool, id] of Object.entries(config.modelIds)) {
      if (!config.disabled.has(tool as Tool)) modelIds[tool] = id;
    }
    res.json({
      status: "ok",
      model_ids: modelIds,
      dims: { image: EMBEDDING_DIM, text: EMBEDDING_DIM },
    });
  });

  app.use((_req: Request, res: Response) => {
    sendError(res, 404, "unknown_route", "no such route");
  });

  // body-parser failures land here; a too-large body maps to the same
  // status the engine reads as a context problem
  app.use((err: Error & { type?: string }, _req: Request, res: Response, next: NextFunction) => {
    if (res.headersSent) {
      next(err);
      return;
    }
    if (err.type === "entity.too.large") {
      sendError(res, 413, "context_overflow", "request body too large");
    } else if (err.type === "entity.parse.failed" || err instanceof SyntaxError) {
      sendError(res, 400, "invalid_request", "body is not valid JSON");
    } else {
      sendError(res, 500, "internal", String(err));
    }
  });

  return app;
}
