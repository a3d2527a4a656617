// Replay-file speech driver: a deterministic stand-in for live microphone
// capture. File format: one {"text": <string>, "delay_ms": <int>} per line.

export interface ReplayEvent {
  text: string;
  delayMs: number;
}

export function parseReplayFile(contents: string): ReplayEvent[] {
  const events: ReplayEvent[] = [];
  for (const [i, line] of contents.split('\n').entries()) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    let record: unknown;
    try {
      record = JSON.parse(trimmed);
    } catch {
      throw new Error(`replay file line ${i + 1}: not valid JSON`);
    }
    const { text, delay_ms } = record as { text?: unknown; delay_ms?: unknown };
    if (typeof text !== 'string' || typeof delay_ms !== 'number' || delay_ms < 0) {
      throw new Error(`replay file line ${i + 1}: expected {"text", "delay_ms"}`);
    }
    events.push({ text, delayMs: delay_ms });
  }
  return events;
}

const wait = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Feed the events to `emit` with their delays; `ts` is the accumulated time
 * in milliseconds. Tests inject `sleep: async () => {}` to run instantly.
 */
export async function runReplay(
  events: ReplayEvent[],
  emit: (text: string, ts: number) => void | Promise<void>,
  sleep: (ms: number) => Promise<void> = wait,
): Promise<void> {
  let ts = 0;
  for (const event of events) {
    if (event.delayMs > 0) await sleep(event.delayMs);
    ts += event.delayMs;
    await emit(event.text, ts);
  }
}
