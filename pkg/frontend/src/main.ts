import { ApiClient } from "./api.js";
import { ScrollingChart } from "./chart.js";
import { LiveView } from "./liveView.js";
import { RoiEditor } from "./roiEditor.js";
import { TuningPanel } from "./tuningPanel.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing #${id}`);
  }
  return el as T;
}

async function start(): Promise<void> {
  const api = new ApiClient("");
  const chart = new ScrollingChart(400);

  const liveView = new LiveView({
    api,
    banner: byId("event-banner"),
    frameImage: byId<HTMLImageElement>("frame-image"),
    frameLabel: byId("frame-label"),
    connectionLabel: byId("connection-label"),
    eventsList: byId("events-list"),
    chart,
    chartCanvas: byId<HTMLCanvasElement>("chart-canvas"),
  });

  const editor = new RoiEditor({
    canvas: byId<HTMLCanvasElement>("roi-canvas"),
    api,
    saveButton: byId<HTMLButtonElement>("roi-save"),
    resetButton: byId<HTMLButtonElement>("roi-reset"),
    message: byId("roi-message"),
  });

  const tuning = new TuningPanel({
    container: byId("tuning-panel"),
    api,
    onConfig: (config) => {
      chart.setThresholds(config.score_on, config.score_off);
      byId("detector-label").textContent = config.detector;
    },
  });

  const status = await api.getStatus();
  byId("detector-label").textContent = status.detector;
  await tuning.loadFromServer();
  await editor.loadFromServer();
  await liveView.refreshEvents();

  // Size the editing canvas to the stream by probing the first cached frame.
  const probe = new Image();
  probe.onload = () => {
    const roiCanvas = byId<HTMLCanvasElement>("roi-canvas");
    roiCanvas.width = probe.width;
    roiCanvas.height = probe.height;
    editor.setFrameSize(probe.width, probe.height);
  };
  probe.src = api.frameUrl(Math.max(status.frame - 1, 0), false);

  const markButton = byId<HTMLButtonElement>("mark-button");
  const markLabel = byId<HTMLInputElement>("mark-label");
  markButton.addEventListener("click", () => {
    const frame = liveView.lastRecord?.frame ?? 0;
    void api.mark(frame, markLabel.value || "operator mark");
  });

  // Redraw the ROI outline over the live frame at a steady cadence.
  const roiCanvas = byId<HTMLCanvasElement>("roi-canvas");
  const frameImage = byId<HTMLImageElement>("frame-image");
  setInterval(() => {
    const ctx = roiCanvas.getContext("2d");
    if (!ctx) {
      return;
    }
    ctx.clearRect(0, 0, roiCanvas.width, roiCanvas.height);
    if (frameImage.complete && frameImage.naturalWidth > 0) {
      ctx.drawImage(frameImage, 0, 0, roiCanvas.width, roiCanvas.height);
    }
    editor.draw(ctx);
  }, 100);

  liveView.connect();
}

window.addEventListener("DOMContentLoaded", () => {
  void start();
});
