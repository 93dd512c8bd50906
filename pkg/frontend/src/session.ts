import type { ChatRequest, ChatResponse, Turn } from "./types.js";

/**
 * Session state is a pure function of the request/response log: rendering
 * replays `turns`, so the whole UI can be rebuilt from it at any time.
 */
export interface SessionState {
  turns: Turn[];
  selectedEmotion: string;
  selectedVariant: string;
  pending: boolean;
  error: string | null;
}

export function initialSession(defaultEmotion: string, defaultVariant: string): SessionState {
  return {
    turns: [],
    selectedEmotion: defaultEmotion,
    selectedVariant: defaultVariant,
    pending: false,
    error: null,
  };
}

/** The request body is driven entirely by the current selector state. */
export function buildChatRequest(state: SessionState, text: string): ChatRequest {
  return {
    text,
    emotion: state.selectedEmotion,
    variant: state.selectedVariant,
  };
}

export function appendTurn(
  state: SessionState,
  request: ChatRequest,
  response: ChatResponse,
): SessionState {
  const turn: Turn = {
    userText: request.text,
    emotion: request.emotion,
    variant: request.variant,
    response,
  };
  return { ...state, turns: [...state.turns, turn], pending: false, error: null };
}

export function withError(state: SessionState, message: string): SessionState {
  return { ...state, pending: false, error: message };
}

export function withSelection(
  state: SessionState,
  emotion?: string,
  variant?: string,
): SessionState {
  return {
    ...state,
    selectedEmotion: emotion ?? state.selectedEmotion,
    selectedVariant: variant ?? state.selectedVariant,
  };
}
