export const EMOTION_LABELS = [
  'happy',
  'sad',
  'surprised',
  'fearful',
  'disgusted',
  'angry',
  'neutral',
] as const;

export type EmotionLabel = (typeof EMOTION_LABELS)[number];

/** Fixed badge colors so emotions stay scannable across the transcript. */
export const EMOTION_COLORS: Record<EmotionLabel, string> = {
  happy: '#e6b800',
  sad: '#3c5adc',
  surprised: '#d050f0',
  fearful: '#8c3cc8',
  disgusted: '#3cbe5a',
  angry: '#e03228',
  neutral: '#969696',
};

export interface TurnReply {
  emotion: string;
  text: string;
  round_index: number;
  warnings: string[];
}

export interface TranscriptRound {
  round_index: number;
  emotion: string;
  text: string;
  created_at: number;
  dropped: boolean;
}

export interface Transcript {
  session_id: string;
  rounds: TranscriptRound[];
}

export interface HealthInfo {
  status: string;
  checkpoint_hash: string | null;
  prompt_set_hash: string;
}

export interface ServerError {
  code: string;
  message: string;
}

export interface StagedMedia {
  audio: Blob;
  audioName: string;
  video?: Blob;
  videoName?: string;
}

export interface UiRound {
  roundIndex: number;
  emotion: string;
  text: string;
  latencyMs: number;
  dropped: boolean;
  audioLabel: string;
}

export type ConnectionStatus = 'disconnected' | 'connecting' | 'ready' | 'error';

export interface UiSessionState {
  sessionId: string | null;
  rounds: UiRound[];
  status: ConnectionStatus;
  pending: boolean;
  health: HealthInfo | null;
  lastError: ServerError | null;
}
