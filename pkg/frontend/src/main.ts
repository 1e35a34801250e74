import { DialogueClient } from './api.js';
import { MediaValidationError, stageUpload, startRecording, type Recorder } from './capture.js';
import { SessionController } from './state.js';
import { renderAll, type Panels } from './ui.js';

function requireEl<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get('server') ?? 'http://127.0.0.1:8731';
  const client = new DialogueClient(baseUrl);
  const controller = new SessionController(client);

  const panels: Panels = {
    transcript: requireEl('transcript'),
    status: requireEl('status'),
    error: requireEl('error'),
    sendButton: requireEl<HTMLButtonElement>('send'),
  };
  const audioInput = requireEl<HTMLInputElement>('audio-file');
  const videoInput = requireEl<HTMLInputElement>('video-file');
  const recordButton = requireEl<HTMLButtonElement>('record');

  controller.subscribe((state) => renderAll(state, panels));

  requireEl<HTMLButtonElement>('start').addEventListener('click', () => {
    void controller.start();
  });

  panels.sendButton.addEventListener('click', () => {
    const audio = audioInput.files?.[0];
    if (!audio) {
      panels.error.textContent = 'pick a WAV file first';
      panels.error.classList.remove('hidden');
      return;
    }
    try {
      controller.send(stageUpload(audio, videoInput.files?.[0]));
    } catch (err) {
      if (err instanceof MediaValidationError) {
        panels.error.textContent = err.message;
        panels.error.classList.remove('hidden');
      } else {
        throw err;
      }
    }
  });

  let activeRecorder: Recorder | null = null;
  recordButton.addEventListener('click', () => {
    if (activeRecorder) {
      const recorder = activeRecorder;
      activeRecorder = null;
      recordButton.textContent = 'record';
      void recorder.stop().then((media) => controller.send(media));
      return;
    }
    void startRecording(false).then((recorder) => {
      activeRecorder = recorder;
      recordButton.textContent = 'stop & send';
    });
  });
}

if (typeof document !== 'undefined' && document.getElementById('transcript')) {
  bootstrap();
}
