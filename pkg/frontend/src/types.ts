/** Wire contract shared with the inference service. */

export interface ChatRequest {
  text: string;
  emotion: string;
  variant: string;
}

export interface AttentionPayload {
  source_tokens: string[];
  output_tokens: string[];
  matrix: number[][];
}

export interface ChatResponse {
  response: string;
  detected_emotion: string;
  distribution: number[];
  attention: AttentionPayload;
}

export interface ModelInfo {
  variant: string;
  config_digest: string;
}

/** One completed exchange, as rendered in the message list. */
export interface Turn {
  userText: string;
  emotion: string;
  variant: string;
  response: ChatResponse;
}
