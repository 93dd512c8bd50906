/**
 * Canonical emotion order. The service's /api/emotions returns the same
 * list; this copy seeds the selector before the fetch resolves and pins
 * the order tests assert against.
 */
export const EMOTION_ORDER = [
  "anger",
  "disgust",
  "fear",
  "joy",
  "sadness",
  "surprise",
  "love",
  "thankfulness",
  "guilt",
] as const;

export type EmotionName = (typeof EMOTION_ORDER)[number];
