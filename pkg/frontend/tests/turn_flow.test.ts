// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from 'vitest';

import { DialogueClient } from '../src/api.js';
import { SessionController } from '../src/state.js';
import { badgeColor, renderAll, type Panels } from '../src/ui.js';
import { StubServer } from './stub_server.js';

function wavFile(name = 'turn.wav'): File {
  return new File([new Uint8Array([82, 73, 70, 70])], name, { type: 'audio/wav' });
}

function mountPanels(): Panels {
  document.body.innerHTML = `
    <div id="status"></div>
    <div id="error" class="hidden"></div>
    <ol id="transcript"></ol>
    <button id="send"></button>`;
  return {
    transcript: document.getElementById('transcript') as HTMLElement,
    status: document.getElementById('status') as HTMLElement,
    error: document.getElementById('error') as HTMLElement,
    sendButton: document.getElementById('send') as HTMLButtonElement,
  };
}

async function settle(controller: SessionController): Promise<void> {
  for (let i = 0; i < 50 && (controller.getState().pending || controller.queuedCount > 0); i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

describe('full turn round-trip against the stub server', () => {
  let stub: StubServer;
  let controller: SessionController;
  let panels: Panels;

  beforeEach(() => {
    stub = new StubServer({ replies: [{ emotion: 'happy', text: 'glad to hear it!' }] });
    controller = new SessionController(new DialogueClient('http://stub', stub.fetch));
    panels = mountPanels();
    controller.subscribe((state) => renderAll(state, panels));
  });

  it('uploads, renders the badge and text, and updates the transcript', async () => {
    await controller.start();
    expect(controller.getState().status).toBe('ready');
    expect(panels.status.textContent).toContain('checkpoint c0ffee00');

    controller.send({ audio: wavFile(), audioName: 'turn.wav' });
    await settle(controller);

    const state = controller.getState();
    expect(state.rounds).toHaveLength(1);
    expect(state.rounds[0]?.emotion).toBe('happy');

    const badge = panels.transcript.querySelector('.emotion-badge') as HTMLElement;
    expect(badge.textContent).toBe('happy');
    expect(badge.dataset.emotion).toBe('happy');
    const text = panels.transcript.querySelector('.ai-text') as HTMLElement;
    expect(text.textContent).toBe('glad to hear it!');
    expect(panels.transcript.querySelectorAll('.round')).toHaveLength(1);
  });

  it('renders a server error inline without mutating history', async () => {
    await controller.start();
    controller.send({ audio: wavFile(), audioName: 'a.wav' });
    await settle(controller);
    const before = panels.transcript.innerHTML;

    stub.failNext(400, 'DecodeError', 'bad.wav: not a wav');
    controller.send({ audio: wavFile('bad.wav'), audioName: 'bad.wav' });
    await settle(controller);

    expect(panels.error.classList.contains('hidden')).toBe(false);
    expect(panels.error.textContent).toContain('DecodeError');
    expect(panels.transcript.innerHTML).toBe(before);
    expect(controller.getState().rounds).toHaveLength(1);
  });

  it('queues a second send until the first resolves', async () => {
    await controller.start();
    controller.send({ audio: wavFile('one.wav'), audioName: 'one.wav' });
    controller.send({ audio: wavFile('two.wav'), audioName: 'two.wav' });
    expect(controller.queuedCount).toBe(1);
    await settle(controller);

    const state = controller.getState();
    expect(state.rounds).toHaveLength(2);
    expect(state.rounds.map((r) => r.roundIndex)).toEqual([1, 2]);
    const turnPosts = stub.requests.filter((r) => r.includes('/turns'));
    expect(turnPosts).toHaveLength(2);
  });

  it('disables the send button while a turn is pending', async () => {
    await controller.start();
    expect(panels.sendButton.disabled).toBe(false);
    controller.send({ audio: wavFile(), audioName: 'a.wav' });
    expect(panels.sendButton.disabled).toBe(true);
    await settle(controller);
    expect(panels.sendButton.disabled).toBe(false);
  });
});

describe('badge colors', () => {
  it('assigns a fixed color per label', () => {
    expect(badgeColor('happy')).not.toBe(badgeColor('sad'));
    expect(badgeColor('unknown-emotion')).toBe(badgeColor('neutral'));
  });
});
