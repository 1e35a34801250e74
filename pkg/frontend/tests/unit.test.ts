import { describe, expect, it } from 'vitest';

import { ApiError, DialogueClient } from '../src/api.js';
import { encodeWav, MediaValidationError, stageUpload } from '../src/capture.js';
import { StubServer } from './stub_server.js';

function wavFile(name: string, type = 'audio/wav'): File {
  return new File([new Uint8Array(4)], name, { type });
}

describe('upload staging validation', () => {
  it('accepts wav plus optional mp4 or zip', () => {
    const staged = stageUpload(wavFile('a.wav'), new File([], 'v.mp4', { type: 'video/mp4' }));
    expect(staged.audioName).toBe('a.wav');
    expect(staged.videoName).toBe('v.mp4');
  });

  it('accepts wav by extension when the browser has no mime', () => {
    expect(stageUpload(wavFile('a.WAV', '')).audioName).toBe('a.WAV');
  });

  it('rejects non-wav audio', () => {
    expect(() => stageUpload(new File([], 'a.mp3', { type: 'audio/mpeg' }))).toThrow(
      MediaValidationError,
    );
  });

  it('rejects unsupported video container', () => {
    expect(() => stageUpload(wavFile('a.wav'), new File([], 'v.avi'))).toThrow(
      MediaValidationError,
    );
  });
});

describe('wav encoding', () => {
  it('writes a RIFF header and 16-bit samples', async () => {
    const blob = encodeWav(new Float32Array([0, 0.5, -0.5, 1]), 16000);
    const bytes = new Uint8Array(await blob.arrayBuffer());
    expect(String.fromCharCode(...bytes.slice(0, 4))).toBe('RIFF');
    expect(String.fromCharCode(...bytes.slice(8, 12))).toBe('WAVE');
    expect(bytes.length).toBe(44 + 4 * 2);
    const view = new DataView(bytes.buffer);
    expect(view.getUint32(24, true)).toBe(16000);
    expect(view.getInt16(44 + 6, true)).toBe(32767);
  });
});

describe('api client', () => {
  it('posts multipart with audio and optional video', async () => {
    const stub = new StubServer();
    const client = new DialogueClient('http://stub/', stub.fetch);
    const sessionId = await client.createSession();
    const reply = await client.postTurn(sessionId, {
      audio: new Blob([new Uint8Array(4)]),
      audioName: 'a.wav',
      video: new Blob([]),
      videoName: 'v.zip',
    });
    expect(reply.round_index).toBe(1);
    const transcript = await client.transcript(sessionId);
    expect(transcript.rounds).toHaveLength(1);
  });

  it('maps structured errors to ApiError', async () => {
    const stub = new StubServer();
    const client = new DialogueClient('http://stub', stub.fetch);
    try {
      await client.transcript('missing');
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(404);
      expect((err as ApiError).body.code).toBe('UnknownSession');
    }
  });

  it('deletes sessions', async () => {
    const stub = new StubServer();
    const client = new DialogueClient('http://stub', stub.fetch);
    const id = await client.createSession();
    await client.deleteSession(id);
    await expect(client.transcript(id)).rejects.toBeInstanceOf(ApiError);
  });
});
