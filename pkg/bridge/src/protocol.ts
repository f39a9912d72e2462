// Zod mirrors of the wire protocol request schemas.

import { z } from "zod";

export const imageRequest = z.strictObject({
  image_b64: z.string().min(1),
  model_id: z.string().optional(),
});

export const textRequest = z.strictObject({
  text: z.string().min(1),
  model_id: z.string().optional(),
});

export const completeRequest = z.strictObject({
  prompt: z.string(),
  max_tokens: z.number().int().min(1),
  temperature: z.number().min(0),
  stop: z.array(z.string()).optional(),
  model_id: z.string().optional(),
});

const B64_SHAPE = /^[A-Za-z0-9+/]*={0,2}$/;

export class InvalidBase64Error extends Error {}

export function decodeBase64(value: string): Uint8Array {
  if (value.length % 4 !== 0 || !B64_SHAPE.test(value)) {
    throw new InvalidBase64Error("image_b64 is not valid base64");
  }
  return new Uint8Array(Buffer.from(value, "base64"));
}
