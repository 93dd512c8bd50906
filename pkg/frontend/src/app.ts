import { ApiError, fetchEmotions, fetchModels, postChat } from "./api.js";
import { renderDistribution, buildDistributionBars } from "./distribution.js";
import { EMOTION_ORDER } from "./emotions.js";
import { buildHeatmap, renderHeatmap } from "./heatmap.js";
import {
  SessionState,
  appendTurn,
  buildChatRequest,
  initialSession,
  withError,
  withSelection,
} from "./session.js";
import type { Turn } from "./types.js";

let session: SessionState = initialSession(EMOTION_ORDER[0], "default");
let emotionNames: readonly string[] = EMOTION_ORDER;

function el<K extends keyof HTMLElementTagNameMap>(tag: K, cls?: string, text?: string) {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderTurn(turn: Turn): HTMLElement {
  const wrap = el("div", "turn");
  const user = el("div", "msg user");
  user.append(el("span", "bubble", turn.userText));
  const meta = el("span", "badge", `${turn.emotion} · ${turn.variant}`);
  user.append(meta);
  wrap.append(user);

  const bot = el("div", "msg bot");
  bot.append(el("span", "bubble", turn.response.response || "(empty response)"));
  bot.append(el("span", "badge detected", `detected: ${turn.response.detected_emotion}`));
  wrap.append(bot);

  const panels = el("div", "panels");
  const distPanel = el("div", "panel");
  distPanel.append(el("h4", undefined, "classifier verdict"));
  distPanel.append(renderDistribution(buildDistributionBars(turn.response.distribution, emotionNames)));
  panels.append(distPanel);

  const att = turn.response.attention;
  const heatPanel = el("div", "panel");
  heatPanel.append(el("h4", undefined, "attention"));
  heatPanel.append(renderHeatmap(buildHeatmap(att.matrix, att.source_tokens, att.output_tokens)));
  panels.append(heatPanel);
  wrap.append(panels);
  return wrap;
}

function redraw() {
  const log = document.getElementById("log")!;
  log.replaceChildren(...session.turns.map(renderTurn));
  log.scrollTop = log.scrollHeight;

  const banner = document.getElementById("banner")!;
  banner.textContent = session.error ?? "";
  banner.style.display = session.error ? "block" : "none";

  (document.getElementById("send") as HTMLButtonElement).disabled = session.pending;
}

function fillSelect(id: string, options: string[], keep?: string) {
  const select = document.getElementById(id) as HTMLSelectElement;
  select.replaceChildren(
    ...options.map((name) => {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      return opt;
    }),
  );
  if (keep && options.includes(keep)) select.value = keep;
}

async function submit() {
  const input = document.getElementById("text") as HTMLInputElement;
  const text = input.value.trim();
  if (!text || session.pending) return;
  session = { ...session, pending: true, error: null };
  redraw();
  const request = buildChatRequest(session, text);
  try {
    const response = await postChat(request);
    session = appendTurn(session, request, response);
    input.value = "";
  } catch (err) {
    const msg =
      err instanceof ApiError
        ? err.status >= 500
          ? `server error (${err.status}); try again`
          : err.message
        : "network failure; check the service and retry";
    session = withError(session, msg);
  }
  redraw();
}

async function boot() {
  fillSelect("emotion", [...EMOTION_ORDER], session.selectedEmotion);
  fillSelect("variant", ["default"], "default");

  document.getElementById("emotion")!.addEventListener("change", (ev) => {
    session = withSelection(session, (ev.target as HTMLSelectElement).value, undefined);
  });
  document.getElementById("variant")!.addEventListener("change", (ev) => {
    session = withSelection(session, undefined, (ev.target as HTMLSelectElement).value);
  });
  document.getElementById("send")!.addEventListener("click", submit);
  document.getElementById("text")!.addEventListener("keydown", (ev) => {
    if ((ev as KeyboardEvent).key === "Enter") submit();
  });

  try {
    const [emotions, models] = await Promise.all([fetchEmotions(), fetchModels()]);
    emotionNames = emotions;
    fillSelect("emotion", emotions, session.selectedEmotion);
    const variants = models.map((m) => m.variant);
    fillSelect("variant", variants, variants[0]);
    session = withSelection(session, undefined, variants[0]);
  } catch {
    session = withError(session, "could not reach the service; selectors show defaults");
  }
  redraw();
}

boot();
