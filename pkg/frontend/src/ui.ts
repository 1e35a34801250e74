import { EMOTION_COLORS, type EmotionLabel, type UiSessionState } from './types.js';

export function badgeColor(emotion: string): string {
  return EMOTION_COLORS[emotion as EmotionLabel] ?? EMOTION_COLORS.neutral;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderBadge(emotion: string): HTMLElement {
  const badge = el('span', 'emotion-badge', emotion);
  badge.style.backgroundColor = badgeColor(emotion);
  badge.dataset.emotion = emotion;
  return badge;
}

/** Full re-render of the transcript panel from state (server-mirrored). */
export function renderTranscript(state: UiSessionState, container: HTMLElement): void {
  container.replaceChildren();
  for (const round of state.rounds) {
    const item = el('li', round.dropped ? 'round dropped' : 'round');
    item.dataset.roundIndex = String(round.roundIndex);

    const user = el('div', 'user-turn');
    user.append(el('span', 'speaker', 'you'));
    user.append(el('span', 'media-label', round.audioLabel || 'audio turn'));
    item.append(user);

    const ai = el('div', 'ai-turn');
    ai.append(el('span', 'speaker', 'assistant'));
    ai.append(renderBadge(round.emotion));
    ai.append(el('span', 'ai-text', round.text));
    if (round.latencyMs > 0) {
      ai.append(el('span', 'latency', `${round.latencyMs} ms`));
    }
    item.append(ai);

    if (round.dropped) {
      item.append(el('div', 'truncation-marker', 'dropped from model context'));
    }
    container.append(item);
  }
}

export function renderStatus(state: UiSessionState, container: HTMLElement): void {
  const parts = [`status: ${state.status}`];
  if (state.sessionId) parts.push(`session ${state.sessionId.slice(0, 8)}`);
  if (state.health) {
    parts.push(`checkpoint ${state.health.checkpoint_hash?.slice(0, 8) ?? 'none'}`);
    parts.push(`prompts ${state.health.prompt_set_hash.slice(0, 8)}`);
  }
  if (state.pending) parts.push('waiting for reply…');
  container.textContent = parts.join(' | ');
}

export function renderError(state: UiSessionState, container: HTMLElement): void {
  if (state.lastError) {
    container.textContent = `${state.lastError.code}: ${state.lastError.message}`;
    container.classList.remove('hidden');
  } else {
    container.textContent = '';
    container.classList.add('hidden');
  }
}

export interface Panels {
  transcript: HTMLElement;
  status: HTMLElement;
  error: HTMLElement;
  sendButton: HTMLButtonElement;
}

export function renderAll(state: UiSessionState, panels: Panels): void {
  renderTranscript(state, panels.transcript);
  renderStatus(state, panels.status);
  renderError(state, panels.error);
  panels.sendButton.disabled = state.pending || state.status !== 'ready';
}
