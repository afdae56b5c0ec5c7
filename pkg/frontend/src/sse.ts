/**
 * Server-sent event handling: an incremental text parser plus a resumable
 * stream reader built on fetch. Resume state is the last seen sequence
 * number, sent back as Last-Event-ID.
 */

import type { ServiceEvent } from "./types.js";

export interface ParsedChunk {
  events: ServiceEvent[];
  remainder: string;
}

/** Parse complete SSE frames out of a buffer; keep the unterminated tail. */
export function parseSSE(buffer: string): ParsedChunk {
  const events: ServiceEvent[] = [];
  const frames = buffer.split("\n\n");
  const remainder = frames.pop() ?? "";
  for (const frame of frames) {
    if (!frame.trim()) continue;
    let data = "";
    for (const line of frame.split("\n")) {
      if (line.startsWith("data:")) {
        data += line.slice(5).trim();
      }
    }
    if (!data) continue;
    try {
      events.push(JSON.parse(data) as ServiceEvent);
    } catch {
      // tolerate malformed frames; the stream can be resumed from lastSeq
    }
  }
  return { events, remainder };
}

export interface StreamHandlers {
  onEvent: (event: ServiceEvent) => void;
  onDisconnect?: (error: unknown) => void;
  onReconnect?: () => void;
}

/**
 * Long-poll style consumer of GET /sessions/{id}/events. Each round asks the
 * server to follow for a bounded window and resumes from the last sequence
 * number, so a dropped connection replays nothing and loses nothing.
 */
export class EventStream {
  private stopped = false;
  lastSeq = -1;

  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly handlers: StreamHandlers,
    private readonly followWindow = 15,
  ) {}

  stop(): void {
    this.stopped = true;
  }

  async runOnce(follow = true): Promise<number> {
    const url =
      `${this.baseUrl}/sessions/${this.sessionId}/events` +
      `?since=${this.lastSeq + 1}&follow=${follow}&timeout=${this.followWindow}`;
    const response = await fetch(url);
    if (!response.ok) {
      throw new Error(`event stream HTTP ${response.status}`);
    }
    const text = await response.text();
    const { events } = parseSSE(text + "\n\n");
    let delivered = 0;
    for (const event of events) {
      if (event.seq > this.lastSeq) {
        this.lastSeq = event.seq;
        this.handlers.onEvent(event);
        delivered += 1;
      }
    }
    return delivered;
  }

  async run(): Promise<void> {
    let failing = false;
    while (!this.stopped) {
      try {
        await this.runOnce(true);
        if (failing) {
          failing = false;
          this.handlers.onReconnect?.();
        }
      } catch (error) {
        if (!failing) {
          failing = true;
          this.handlers.onDisconnect?.(error);
        }
        await new Promise((resolve) => setTimeout(resolve, 1000));
      }
    }
  }
}
