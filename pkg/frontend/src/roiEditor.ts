import type { ApiClient } from "./api.js";
import type { RoiConfig } from "./types.js";

const HANDLE_RADIUS = 6;

export interface RoiEditorOptions {
  canvas: HTMLCanvasElement;
  api: ApiClient;
  saveButton: HTMLButtonElement;
  resetButton: HTMLButtonElement;
  message: HTMLElement;
  /** Called with the server-accepted config after every successful save. */
  onSaved?: (roi: RoiConfig) => void;
}

/** Click-to-draw polygon editor for the slack region.
 *
 * Clicking empty space appends a vertex; pressing on an existing vertex drags
 * it (clamped to the frame bounds). Save requires at least 3 vertices, PUTs
 * the polygon, and re-reads the server's accepted config so the outline always
 * reflects what the pipeline actually runs.
 */
export class RoiEditor {
  vertices: [number, number][] = [];
  polygonName = "drawn";
  sourceId = "";
  frameWidth = 0;
  frameHeight = 0;
  private dragIndex: number | null = null;
  private opts: RoiEditorOptions;

  constructor(opts: RoiEditorOptions) {
    this.opts = opts;
    const { canvas, saveButton, resetButton } = opts;
    canvas.addEventListener("mousedown", (e) => this.onMouseDown(e));
    canvas.addEventListener("mousemove", (e) => this.onMouseMove(e));
    canvas.addEventListener("mouseup", () => this.onMouseUp());
    saveButton.addEventListener("click", () => void this.save());
    resetButton.addEventListener("click", () => void this.loadFromServer());
    this.updateControls();
  }

  setFrameSize(width: number, height: number): void {
    this.frameWidth = width;
    this.frameHeight = height;
  }

  async loadFromServer(): Promise<void> {
    const roi = await this.opts.api.getRoi();
    this.applyConfig(roi);
    this.updateControls();
  }

  applyConfig(roi: RoiConfig): void {
    this.sourceId = roi.source_id;
    const first = roi.polygons[0];
    if (first) {
      this.polygonName = first.name;
      this.vertices = first.vertices.map(([x, y]) => [x, y]);
    } else {
      this.vertices = [];
    }
  }

  /** The exact body a save will PUT (single edited polygon). */
  payload(): RoiConfig {
    return {
      source_id: this.sourceId,
      polygons: [
        {
          name: this.polygonName,
          vertices: this.vertices.map(([x, y]) => [x, y] as [number, number]),
        },
      ],
    };
  }

  async save(): Promise<boolean> {
    if (this.vertices.length < 3) {
      this.setMessage("need at least 3 vertices");
      return false;
    }
    const result = await this.opts.api.putRoi(this.payload());
    if (!result.ok) {
      this.setMessage(
        Object.entries(result.errors)
          .map(([field, message]) => `${field}: ${message}`)
          .join("; "),
      );
      return false;
    }
    const accepted = await this.opts.api.getRoi();
    this.applyConfig(accepted);
    this.setMessage("region saved");
    this.updateControls();
    this.opts.onSaved?.(accepted);
    return true;
  }

  clamp(x: number, y: number): [number, number] {
    const cx = Math.min(Math.max(x, 0), this.frameWidth || x);
    const cy = Math.min(Math.max(y, 0), this.frameHeight || y);
    return [cx, cy];
  }

  private canvasPoint(e: MouseEvent): [number, number] {
    const canvas = this.opts.canvas;
    const rect = canvas.getBoundingClientRect();
    const scaleX = rect.width > 0 ? canvas.width / rect.width : 1;
    const scaleY = rect.height > 0 ? canvas.height / rect.height : 1;
    return [(e.clientX - rect.left) * scaleX, (e.clientY - rect.top) * scaleY];
  }

  private hitVertex(x: number, y: number): number | null {
    for (let i = 0; i < this.vertices.length; i++) {
      const [vx, vy] = this.vertices[i];
      if (Math.hypot(vx - x, vy - y) <= HANDLE_RADIUS) {
        return i;
      }
    }
    return null;
  }

  onMouseDown(e: MouseEvent): void {
    const [x, y] = this.canvasPoint(e);
    const hit = this.hitVertex(x, y);
    if (hit !== null) {
      this.dragIndex = hit;
    } else {
      this.vertices.push(this.clamp(x, y));
      this.updateControls();
    }
  }

  onMouseMove(e: MouseEvent): void {
    if (this.dragIndex === null) {
      return;
    }
    const [x, y] = this.canvasPoint(e);
    this.vertices[this.dragIndex] = this.clamp(x, y);
  }

  onMouseUp(): void {
    this.dragIndex = null;
  }

  private setMessage(text: string): void {
    this.opts.message.textContent = text;
  }

  private updateControls(): void {
    this.opts.saveButton.disabled = this.vertices.length < 3;
    if (this.vertices.length < 3) {
      this.setMessage(`${this.vertices.length} of 3 vertices placed`);
    } else {
      this.setMessage("");
    }
  }

  /** Outline + handles over whatever is already on the canvas. */
  draw(ctx: CanvasRenderingContext2D): void {
    if (this.vertices.length === 0) {
      return;
    }
    ctx.save();
    ctx.strokeStyle = "#50c8ff";
    ctx.fillStyle = "#50c8ff";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    const [x0, y0] = this.vertices[0];
    ctx.moveTo(x0, y0);
    for (const [x, y] of this.vertices.slice(1)) {
      ctx.lineTo(x, y);
    }
    if (this.vertices.length >= 3) {
      ctx.closePath();
    }
    ctx.stroke();
    for (const [x, y] of this.vertices) {
      ctx.beginPath();
      ctx.arc(x, y, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
    ctx.restore();
  }
}
