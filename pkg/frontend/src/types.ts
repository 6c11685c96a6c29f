// Wire shapes of the platform API. char_start values are code-point offsets
// into the raw passage text, not UTF-16 units; src/offsets.ts converts.

export interface WireSpan {
  text: string;
  char_start: number;
}

export interface PassagePayload {
  id: string;
  title: string;
  text: string;
}

export interface SessionState {
  session_id: string;
  worker: string;
  setting: string;
  passage: PassagePayload;
  started_at_ms: number;
  examples_remaining: number;
}

export interface PromptPayload {
  session_id: string;
  prompt_id: string;
  question: string;
  answer: WireSpan;
  origin: string;
}

export interface ModelPrediction {
  answer: WireSpan;
  confidence: number;
}

export interface SubmitResult {
  example_id: string;
  fooled: boolean | null;
  model_prediction: ModelPrediction | null;
  duration_ms: number;
  prompt_provenance: string;
}

export interface ValidationTask {
  task_id: string;
  question: string;
  answer: WireSpan;
  passage: PassagePayload;
}

export interface VoteResult {
  task_id: string;
  votes_cast: number;
  // null until the third vote settles the example
  resolution: string | null;
}

// "mode:generator:sampler:ap|np" -- parsed for behaviour only, never rendered
export interface SettingTraits {
  adversarial: boolean;
  assisted: boolean;
  answerPrompting: boolean;
}

export function parseSetting(key: string): SettingTraits {
  const parts = key.split(':');
  return {
    adversarial: parts[0] === 'adversarial',
    assisted: parts[1] !== 'none' && parts[1] !== undefined,
    answerPrompting: parts[3] === 'ap',
  };
}
