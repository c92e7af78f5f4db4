import type { StreamRecord } from "./types.js";

/** Scrolling count/score chart with the event-open threshold line.
 *
 * Pure rendering: the values plotted are the stream records verbatim and the
 * threshold is whatever the server's config says.
 */
export class ScrollingChart {
  records: StreamRecord[] = [];
  scoreOn = 0;
  scoreOff = 0;
  constructor(private capacity = 400) {}

  push(record: StreamRecord): void {
    this.records.push(record);
    if (this.records.length > this.capacity) {
      this.records.shift();
    }
  }

  setThresholds(scoreOn: number, scoreOff: number): void {
    this.scoreOn = scoreOn;
    this.scoreOff = scoreOff;
  }

  draw(ctx: CanvasRenderingContext2D, width: number, height: number): void {
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#14181d";
    ctx.fillRect(0, 0, width, height);
    if (this.records.length < 2) {
      return;
    }
    const peak = Math.max(
      this.scoreOn * 1.3,
      ...this.records.map((r) => Math.max(r.count, r.score)),
    );
    const toY = (value: number) => height - 4 - (value / peak) * (height - 8);
    const toX = (i: number) => (i / (this.capacity - 1)) * width;

    const line = (pick: (r: StreamRecord) => number, style: string, lineWidth: number) => {
      ctx.strokeStyle = style;
      ctx.lineWidth = lineWidth;
      ctx.beginPath();
      this.records.forEach((r, i) => {
        const x = toX(i);
        const y = toY(pick(r));
        if (i === 0) {
          ctx.moveTo(x, y);
        } else {
          ctx.lineTo(x, y);
        }
      });
      ctx.stroke();
    };
    line((r) => r.count, "#56606c", 1);
    line((r) => r.score, "#ff5a49", 1.8);

    ctx.strokeStyle = "#ffb02e";
    ctx.setLineDash([5, 4]);
    ctx.beginPath();
    ctx.moveTo(0, toY(this.scoreOn));
    ctx.lineTo(width, toY(this.scoreOn));
    ctx.stroke();
    ctx.setLineDash([]);
  }
}
