import type { StagedMedia } from './types.js';

const WAV_TYPES = ['audio/wav', 'audio/x-wav', 'audio/wave'];
const VIDEO_EXTENSIONS = ['.mp4', '.zip'];

export class MediaValidationError extends Error {}

/**
 * Upload-first staging: validate picked files against what the server
 * accepts (16-bit PCM WAV; MP4 or a zip of PNG frames).
 */
export function stageUpload(audioFile: File, videoFile?: File): StagedMedia {
  const audioOk =
    WAV_TYPES.includes(audioFile.type) || audioFile.name.toLowerCase().endsWith('.wav');
  if (!audioOk) {
    throw new MediaValidationError(`audio must be a WAV file, got ${audioFile.name}`);
  }
  if (videoFile) {
    const name = videoFile.name.toLowerCase();
    if (!VIDEO_EXTENSIONS.some((ext) => name.endsWith(ext))) {
      throw new MediaValidationError(`video must be ${VIDEO_EXTENSIONS.join(' or ')}, got ${videoFile.name}`);
    }
  }
  return {
    audio: audioFile,
    audioName: audioFile.name,
    video: videoFile,
    videoName: videoFile?.name,
  };
}

export interface Recorder {
  stop(): Promise<StagedMedia>;
  cancel(): void;
}

/**
 * Optional live capture via getUserMedia/MediaRecorder. Browsers record
 * compressed containers, not PCM WAV, so the recorded audio is decoded
 * and re-encoded into 16-bit PCM WAV client-side before upload.
 */
export async function startRecording(withVideo: boolean): Promise<Recorder> {
  const stream = await navigator.mediaDevices.getUserMedia({ audio: true, video: withVideo });
  const audioChunks: BlobPart[] = [];
  const recorder = new MediaRecorder(stream);
  recorder.ondataavailable = (event) => audioChunks.push(event.data);
  recorder.start();

  const cleanup = () => stream.getTracks().forEach((track) => track.stop());

  return {
    async stop(): Promise<StagedMedia> {
      const blob = await new Promise<Blob>((resolve) => {
        recorder.onstop = () => resolve(new Blob(audioChunks, { type: recorder.mimeType }));
        recorder.stop();
      });
      cleanup();
      const wav = await transcodeToWav(blob);
      return { audio: wav, audioName: 'recording.wav' };
    },
    cancel(): void {
      recorder.stop();
      cleanup();
    },
  };
}

export async function transcodeToWav(blob: Blob, targetRate = 16000): Promise<Blob> {
  const ctx = new OfflineAudioContext(1, 1, targetRate);
  const decoded = await ctx.decodeAudioData(await blob.arrayBuffer());
  const offline = new OfflineAudioContext(
    1,
    Math.ceil(decoded.duration * targetRate),
    targetRate,
  );
  const source = offline.createBufferSource();
  source.buffer = decoded;
  source.connect(offline.destination);
  source.start();
  const rendered = await offline.startRendering();
  return encodeWav(rendered.getChannelData(0), targetRate);
}

export function encodeWav(samples: Float32Array, sampleRate: number): Blob {
  const buffer = new ArrayBuffer(44 + samples.length * 2);
  const view = new DataView(buffer);
  const writeString = (offset: number, value: string) => {
    for (let i = 0; i < value.length; i += 1) {
      view.setUint8(offset + i, value.charCodeAt(i));
    }
  };
  writeString(0, 'RIFF');
  view.setUint32(4, 36 + samples.length * 2, true);
  writeString(8, 'WAVE');
  writeString(12, 'fmt ');
  view.setUint32(16, 16, true);
  view.setUint16(20, 1, true); // PCM
  view.setUint16(22, 1, true); // mono
  view.setUint32(24, sampleRate, true);
  view.setUint32(28, sampleRate * 2, true);
  view.setUint16(32, 2, true);
  view.setUint16(34, 16, true);
  writeString(36, 'data');
  view.setUint32(40, samples.length * 2, true);
  for (let i = 0; i < samples.length; i += 1) {
    const clamped = Math.max(-1, Math.min(1, samples[i] ?? 0));
    view.setInt16(44 + i * 2, Math.round(clamped * 32767), true);
  }
  return new Blob([buffer], { type: 'audio/wav' });
}
