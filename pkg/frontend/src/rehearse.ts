// Rehearse loop: stream words to the service, play cued clips in the cue
// pane, and move the flow marker through the notes.

import type { ClientMessage, ServerMessage } from './types.js';
import type { CuePane, Highlight } from './viewModel.js';

// A clip keeps looping in the cue pane until the speaker is clearly past the
// region: flow index beyond region end by this many words stops playback.
const STOP_SLACK_WORDS = 3;

/** Minimal socket surface; satisfied by browser WebSocket and the ws package. */
export interface MessageSocket {
  send(data: string): void;
}

export interface PlaybackSink {
  play(regionId: string, clipUri: string): void;
  stop(): void;
}

export class RehearsalRun {
  flowIndex = -1;
  cuePane: CuePane = { status: 'idle' };
  readonly cuesSeen: { regionId: string; clipUri: string; flowIndex: number }[] = [];
  readonly errors: string[] = [];
  private playingEnd: number | null = null;

  constructor(
    private readonly socket: MessageSocket,
    private readonly highlights: Highlight[],
    private readonly playback: PlaybackSink,
  ) {}

  /** Rehearse click: reset the marker and (re)start the server-side tracker. */
  start(): void {
    this.flowIndex = -1;
    this.stopPlayback();
    this.sendMessage({ type: 'start' });
  }

  word(text: string, ts: number): void {
    this.sendMessage({ type: 'word', text, ts });
  }

  handleMessage(raw: string): void {
    let message: ServerMessage;
    try {
      message = JSON.parse(raw) as ServerMessage;
    } catch {
      this.errors.push('bad-server-message');
      return;
    }
    switch (message.type) {
      case 'cue': {
        this.cuesSeen.push({
          regionId: message.region_id,
          clipUri: message.clip_uri,
          flowIndex: message.flow_index,
        });
        const region = this.highlights.find((h) => h.regionId === message.region_id);
        this.playback.play(message.region_id, message.clip_uri);
        this.cuePane = {
          status: 'playing',
          regionId: message.region_id,
          clipUri: message.clip_uri,
        };
        this.playingEnd = region ? region.end : null;
        break;
      }
      case 'flow':
        this.flowIndex = message.flow_index;
        if (
          this.cuePane.status === 'playing' &&
          this.playingEnd !== null &&
          this.flowIndex > this.playingEnd + STOP_SLACK_WORDS
        ) {
          this.stopPlayback();
        }
        break;
      case 'error':
        this.errors.push(message.code);
        break;
    }
  }

  private stopPlayback(): void {
    if (this.cuePane.status === 'playing') {
      this.playback.stop();
    }
    this.cuePane = { status: 'idle' };
    this.playingEnd = null;
  }

  private sendMessage(message: ClientMessage): void {
    this.socket.send(JSON.stringify(message));
  }
}
