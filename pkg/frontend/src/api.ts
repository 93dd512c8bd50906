import type { ChatRequest, ChatResponse, ModelInfo } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(path: string): Promise<T> {
  const res = await fetch(path);
  if (!res.ok) throw new ApiError(res.status, await res.text());
  return (await res.json()) as T;
}

export function fetchEmotions(): Promise<string[]> {
  return getJson<string[]>("/api/emotions");
}

export function fetchModels(): Promise<ModelInfo[]> {
  return getJson<ModelInfo[]>("/api/models");
}

export async function postChat(request: ChatRequest): Promise<ChatResponse> {
  const res = await fetch("/api/chat", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(request),
  });
  if (!res.ok) {
    let detail = `request failed with ${res.status}`;
    try {
      const body = (await res.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      // non-JSON error body; keep the status message
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as ChatResponse;
}
