/** Server-sent events over fetch streaming.
 *
 * Implemented directly on ReadableStream instead of EventSource so the same
 * code runs in the browser and under node-based tests.
 */

export type SseState = "connecting" | "open" | "closed" | "error";

/** Incremental parser: feed chunks, get back completed `data:` payloads. */
export class SseParser {
  private buffer = "";

  feed(chunk: string): string[] {
    this.buffer += chunk;
    const payloads: string[] = [];
    let index: number;
    while ((index = this.buffer.indexOf("\n\n")) !== -1) {
      const block = this.buffer.slice(0, index);
      this.buffer = this.buffer.slice(index + 2);
      const data = block
        .split("\n")
        .filter((line) => line.startsWith("data:"))
        .map((line) => line.slice(5).trimStart())
        .join("\n");
      if (data) {
        payloads.push(data);
      }
    }
    return payloads;
  }
}

export interface StreamHandle {
  close(): void;
  done: Promise<void>;
}

/** Consume an SSE endpoint until it ends or `close()` is called. */
export function consumeStream(
  url: string,
  onData: (payload: string) => void,
  onState?: (state: SseState) => void,
): StreamHandle {
  const controller = new AbortController();
  onState?.("connecting");
  const done = (async () => {
    try {
      const response = await fetch(url, {
        signal: controller.signal,
        headers: { Accept: "text/event-stream" },
      });
      if (!response.ok || !response.body) {
        onState?.("error");
        return;
      }
      onState?.("open");
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      const parser = new SseParser();
      for (;;) {
        const { done: finished, value } = await reader.read();
        if (finished) {
          break;
        }
        for (const payload of parser.feed(decoder.decode(value, { stream: true }))) {
          onData(payload);
        }
      }
      onState?.("closed");
    } catch (err) {
      if (controller.signal.aborted) {
        onState?.("closed");
      } else {
        onState?.("error");
      }
    }
  })();
  return { close: () => controller.abort(), done };
}
