// Service configuration resolved from environment variables. The upstream
// LLM credential is referenced by env var NAME only; its value is read at
// call time and must never appear in logs or config dumps.

export const TOOLS = [
  "embed_image",
  "embed_text",
  "caption",
  "scene_graph",
  "oie",
  "complete",
] as const;

export type Tool = (typeof TOOLS)[number];

export class BridgeConfigError extends Error {}

export interface BridgeConfig {
  host: string;
  port: number;
  device: string;
  batchSize: number;
  /** Whitespace-token budget for /v1/complete prompts. */
  contextLimit: number;
  modelIds: Record<Tool, string>;
  disabled: Set<Tool>;
  /** Name of the env var holding upstream LLM credentials. */
  llmCredentialEnv: string;
}

const DEFAULT_MODEL_IDS: Record<Tool, string> = {
  embed_image: "byte-histogram-64",
  embed_text: "trigram-hash-64",
  caption: "template-captioner-1",
  scene_graph: "digest-graph-1",
  oie: "clause-split-1",
  complete: "template-completer-1",
};

function intVar(env: NodeJS.ProcessEnv, name: string, fallback: number): number {
  const raw = env[name];
  if (raw === undefined || raw === "") return fallback;
  const value = Number(raw);
  if (!Number.isInteger(value) || value < 0) {
    throw new BridgeConfigError(`${name} must be a non-negative integer, got ${raw}`);
  }
  return value;
}

export function loadConfig(env: NodeJS.ProcessEnv = process.env): BridgeConfig {
  const disabled = new Set<Tool>();
  const disabledRaw = env.BRIDGE_DISABLED ?? "";
  for (const part of disabledRaw.split(",")) {
    const name = part.trim();
    if (!name) continue;
    if (!TOOLS.includes(name as Tool)) {
      throw new BridgeConfigError(`BRIDGE_DISABLED names unknown tool ${name}`);
    }
    disabled.add(name as Tool);
  }

  const modelIds = { ...DEFAULT_MODEL_IDS };
  for (const tool of TOOLS) {
    const override = env[`BRIDGE_MODEL_${tool.toUpperCase()}`];
    if (override !== undefined) modelIds[tool] = override;
  }
  for (const tool of TOOLS) {
    if (!disabled.has(tool) && modelIds[tool].trim() === "") {
      throw new BridgeConfigError(`enabled route ${tool} has no model identifier`);
    }
  }

  return {
    host: env.BRIDGE_HOST ?? "127.0.0.1",
    port: intVar(env, "BRIDGE_PORT", 8750),
    device: env.BRIDGE_DEVICE ?? "cpu",
    batchSize: Math.max(1, intVar(env, "BRIDGE_BATCH_SIZE", 8)),
    contextLimit: Math.max(1, intVar(env, "BRIDGE_CONTEXT_LIMIT", 60000)),
    modelIds,
    disabled,
    llmCredentialEnv: env.BRIDGE_LLM_CREDENTIAL_ENV ?? "BRIDGE_LLM_API_KEY",
  };
}

/** Read the upstream credential value. Callers must not log it. */
export function resolveCredential(
  config: BridgeConfig,
  env: NodeJS.ProcessEnv = process.env,
): string | undefined {
  return env[config.llmCredentialEnv];
}

/** Loggable view of the config: names the credential variable, never its value. */
export function describeConfig(
  config: BridgeConfig,
  env: NodeJS.ProcessEnv = process.env,
): Record<string, unknown> {
  return {
    host: config.host,
    port: config.port,
    device: config.device,
    batch_size: config.batchSize,
    context_limit: config.contextLimit,
    model_ids: { ...config.modelIds },
    disabled: [...config.disabled].sort(),
    llm_credential_env: config.llmCredentialEnv,
    llm_credential_present: resolveCredential(config, env) !== undefined,
  };
}
