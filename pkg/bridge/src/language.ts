// Template and heuristic language backends: captioner, scene graphs,
// clause-split tuple extraction, and the completer.

import { cosine, digestBytes, embedText } from "./features.js";

const NOUNS = [
  "counter", "kettle", "cloth", "drawer", "window", "table",
  "person", "cabinet", "faucet", "shelf",
];
const ADJECTIVES = ["tidy", "bright", "narrow", "steamy", "quiet", "cluttered"];
const PREDICATES = ["near", "holding", "above", "beside", "touching"];

const STOPWORDS = new Set([
  "the", "and", "with", "near", "person", "scene", "frame", "none",
  "for", "from", "into", "onto", "over", "this", "that",
]);

export class ContextOverflowError extends Error {}

function pick<T>(list: T[], index: number): T {
  return list[index % list.length];
}

/** One templated sentence per image, chosen by content digest. */
export function caption(bytes: Uint8Array): string {
  const d = digestBytes(bytes);
  const noun = pick(NOUNS, d[0]);
  let other = pick(NOUNS, d[1]);
  if (other === noun) other = pick(NOUNS, d[1] + 1);
  return `a ${pick(ADJECTIVES, d[2])} scene with the ${noun} ${pick(PREDICATES, d[3])} the ${other}`;
}

export interface GraphEntity {
  label: string;
  box: [number, number, number, number];
}

export interface GraphTriple {
  subject: GraphEntity;
  predicate: string;
  object: GraphEntity;
  confidence: number;
}

function entityAt(d: Uint8Array, offset: number, labelSeed: number): GraphEntity {
  const x1 = d[offset % d.length] % 8;
  const y1 = d[(offset + 1) % d.length] % 8;
  const x2 = x1 + 1 + (d[(offset + 2) % d.length] % 8);
  const y2 = y1 + 1 + (d[(offset + 3) % d.length] % 8);
  return { label: pick(NOUNS, labelSeed), box: [x1, y1, x2, y2] };
}

/** One to three digest-derived triples with small in-frame boxes. */
export function sceneGraph(bytes: Uint8Array): GraphTriple[] {
  const d = digestBytes(bytes);
  const count = 1 + (d[0] % 3);
  const triples: GraphTriple[] = [];
  for (let i = 0; i < count; i++) {
    const base = 1 + i * 9;
    const subjectSeed = d[base % d.length];
    let objectSeed = d[(base + 1) % d.length];
    if (objectSeed % NOUNS.length === subjectSeed % NOUNS.length) objectSeed += 1;
    triples.push({
      subject: entityAt(d, base + 2, subjectSeed),
      predicate: pick(PREDICATES, d[(base + 6) % d.length]),
      object: entityAt(d, base + 7, objectSeed),
      confidence: Math.round((d[(base + 11) % d.length] / 255) * 100) / 100,
    });
  }
  return triples;
}

/** Clause-split extraction: subject, relation, remainder per clause. */
export function extractTuples(text: string): string[][] {
  const clauses = text
    .toLowerCase()
    .split(/[.;!?,]|\band\b|\bthen\b|\bwhile\b/g);
  const tuples: string[][] = [];
  for (const clause of clauses) {
    const words = clause
      .replace(/[^a-z0-9\s'-]/g, " ")
      .split(/\s+/)
      .filter(Boolean);
    if (words.length >= 3) {
      tuples.push([words[0], words[1], words.slice(2).join(" ")]);
    } else if (words.length === 2) {
      tuples.push([words[0], words[1]]);
    }
  }
  return tuples;
}

function contentWords(text: string): string[] {
  return text
    .toLowerCase()
    .replace(/[^a-z\s]/g, " ")
    .split(/\s+/)
    .filter((w) => w.length >= 3 && !STOPWORDS.has(w));
}

function applyLimits(reply: string, maxTokens: number, stop: string[]): string {
  let out = reply;
  for (const seq of stop) {
    if (!seq) continue;
    const at = out.indexOf(seq);
    if (at >= 0) out = out.slice(0, at);
  }
  const tokens = out.split(/\s+/).filter(Boolean);
  return tokens.slice(0, Math.max(1, maxTokens)).join(" ");
}

function answerChoice(prompt: string): string | null {
  const optionsAt = prompt.lastIndexOf("\nOptions:\n");
  if (optionsAt < 0 || !/\nAnswer:\s*$/.test(prompt)) return null;
  const tail = prompt.slice(optionsAt + "\nOptions:\n".length);
  const options: { letter: string; text: string }[] = [];
  for (const line of tail.split("\n")) {
    const m = /^([A-Z])\. (.+)$/.exec(line.trim());
    if (m) options.push({ letter: m[1], text: m[2] });
    else if (line.startsWith("Answer:")) break;
  }
  if (options.length === 0) return null;
  // score options against the event descriptions above the question
  const questionAt = prompt.lastIndexOf("\nQuestion:");
  const contextStart = prompt.lastIndexOf("\nVideo ", questionAt);
  const context = prompt.slice(Math.max(0, contextStart), questionAt > 0 ? questionAt : undefined);
  const contextVec = embedText(context || prompt);
  let best = options[0];
  let bestScore = -Infinity;
  for (const option of options) {
    const score = cosine(embedText(option.text), contextVec);
    if (score > bestScore) {
      bestScore = score;
      best = option;
    }
  }
  return best.letter;
}

function proposeInstruction(prompt: string): string | null {
  if (!/\nInstruction:\s*$/.test(prompt)) return null;
  const eventAt = prompt.lastIndexOf("\nEvent ");
  const block = eventAt >= 0 ? prompt.slice(eventAt) : prompt;
  const counts = new Map<string, number>();
  const captionRe = /Caption: ([^|]+) \| Triples:/g;
  let m: RegExpExecArray | null;
  while ((m = captionRe.exec(block)) !== null) {
    for (const word of contentWords(m[1])) {
      counts.set(word, (counts.get(word) ?? 0) + 1);
    }
  }
  const ranked = [...counts.entries()].sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1));
  if (ranked.length === 0) return "describe the visible activity";
  const first = ranked[0][0];
  const second = ranked.length > 1 ? ranked[1][0] : "activity";
  return `describe the ${first} and the ${second}`;
}

export function complete(
  prompt: string,
  maxTokens: number,
  stop: string[],
  contextLimit: number,
): string {
  const promptTokens = prompt.split(/\s+/).filter(Boolean).length;
  if (promptTokens > contextLimit) {
    throw new ContextOverflowError(
      `prompt holds ${promptTokens} tokens, limit is ${contextLimit}`,
    );
  }
  const choice = answerChoice(prompt);
  if (choice !== null) return applyLimits(choice, maxTokens, stop);
  const instruction = proposeInstruction(prompt);
  if (instruction !== null) return applyLimits(instruction, maxTokens, stop);
  return applyLimits("the scene continues", maxTokens, stop);
}
