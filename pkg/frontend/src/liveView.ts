import type { ApiClient } from "./api.js";
import { ScrollingChart } from "./chart.js";
import { consumeStream, type SseState, type StreamHandle } from "./sse.js";
import type { SlackEvent, StreamRecord } from "./types.js";

const FRAME_REFRESH_MS = 120;

export interface LiveViewOptions {
  api: ApiClient;
  banner: HTMLElement;
  frameImage: HTMLImageElement;
  frameLabel: HTMLElement;
  connectionLabel: HTMLElement;
  eventsList: HTMLElement;
  chart: ScrollingChart;
  chartCanvas: HTMLCanvasElement;
}

/** Live telemetry pane: stream consumer, banner, chart, frame refresh.
 *
 * The banner state is exactly the server's `event_open` flag; no detection
 * logic runs in the browser.
 */
export class LiveView {
  lastRecord: StreamRecord | null = null;
  private opts: LiveViewOptions;
  private handle: StreamHandle | null = null;
  private lastFrameRefresh = 0;
  private reconnectDelay = 500;
  private stopped = false;

  constructor(opts: LiveViewOptions) {
    this.opts = opts;
    this.setBanner(false);
  }

  connect(): void {
    this.stopped = false;
    this.handle = consumeStream(
      this.opts.api.streamUrl(),
      (payload) => this.handleRecord(JSON.parse(payload) as StreamRecord),
      (state) => this.handleState(state),
    );
  }

  stop(): void {
    this.stopped = true;
    this.handle?.close();
  }

  bannerVisible(): boolean {
    return !this.opts.banner.classList.contains("hidden");
  }

  handleRecord(record: StreamRecord): void {
    this.lastRecord = record;
    this.setBanner(record.event_open);
    this.opts.frameLabel.textContent =
      `frame ${record.frame}  count ${record.count}  score ${record.score.toFixed(1)}`;
    this.opts.chart.push(record);
    this.drawChart();
    const now = Date.now();
    if (now - this.lastFrameRefresh >= FRAME_REFRESH_MS) {
      this.lastFrameRefresh = now;
      this.opts.frameImage.src = this.opts.api.frameUrl(record.frame, true);
    }
  }

  private handleState(state: SseState): void {
    const label = this.opts.connectionLabel;
    if (state === "open") {
      label.textContent = "live";
      this.reconnectDelay = 500;
    } else if (state === "connecting") {
      label.textContent = "connecting…";
    } else if (state === "closed") {
      label.textContent = "replay finished";
      this.setBanner(false);
      void this.refreshEvents();
    } else {
      label.textContent = "stream disconnected, retrying…";
      if (!this.stopped) {
        setTimeout(() => this.connect(), this.reconnectDelay);
        this.reconnectDelay = Math.min(this.reconnectDelay * 2, 5000);
      }
    }
  }

  private setBanner(open: boolean): void {
    this.opts.banner.classList.toggle("hidden", !open);
    if (open) {
      void this.refreshEvents();
    }
  }

  drawChart(): void {
    const canvas = this.opts.chartCanvas;
    const ctx = canvas.getContext ? canvas.getContext("2d") : null;
    if (ctx) {
      this.opts.chart.draw(ctx, canvas.width, canvas.height);
    }
  }

  async refreshEvents(): Promise<void> {
    const events = await this.opts.api.getEvents();
    this.renderEvents(events);
  }

  renderEvents(events: SlackEvent[]): void {
    const list = this.opts.eventsList;
    list.textContent = "";
    for (const event of events) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = this.opts.api.frameUrl(event.peak_frame, true);
      link.target = "_blank";
      link.textContent =
        `event ${event.id}: frames ${event.start_frame}–${event.end_frame}, ` +
        `peak ${event.peak_score.toFixed(0)} @ ${event.peak_frame}`;
      item.appendChild(link);
      list.appendChild(item);
    }
  }
}
