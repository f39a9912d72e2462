// Deterministic lightweight feature backends. Text and image embeddings
// share one dimensionality so the engine's dims check passes.

import { createHash } from "node:crypto";

export const EMBEDDING_DIM = 64;

export function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    // 32-bit FNV prime multiply without BigInt
    hash = (hash + ((hash << 1) + (hash << 4) + (hash << 7) + (hash << 8) + (hash << 24))) >>> 0;
  }
  return hash >>> 0;
}

function normalize(vec: number[]): number[] {
  let sq = 0;
  for (const v of vec) sq += v * v;
  if (sq === 0) {
    const unit = new Array(vec.length).fill(0);
    unit[0] = 1;
    return unit;
  }
  const norm = Math.sqrt(sq);
  return vec.map((v) => v / norm);
}

/** Hashed character-trigram counts, L2-normalized. */
export function embedText(text: string): number[] {
  const clean = text.toLowerCase().replace(/\s+/g, " ").trim();
  const padded = `  ${clean} `;
  const vec = new Array(EMBEDDING_DIM).fill(0);
  for (let i = 0; i + 3 <= padded.length; i++) {
    vec[fnv1a(padded.slice(i, i + 3)) % EMBEDDING_DIM] += 1;
  }
  return normalize(vec);
}

/** Byte-value histogram over 64 bins, L2-normalized. */
export function embedImageBytes(bytes: Uint8Array): number[] {
  const vec = new Array(EMBEDDING_DIM).fill(0);
  for (const b of bytes) vec[b >> 2] += 1;
  return normalize(vec);
}

export function digestBytes(bytes: Uint8Array): Uint8Array {
  return new Uint8Array(createHash("sha256").update(bytes).digest());
}

export function cosine(a: number[], b: number[]): number {
  let dot = 0;
  for (let i = 0; i < a.length; i++) dot += a[i] * b[i];
  return dot;
}
